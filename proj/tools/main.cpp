#include <iostream>
int main() { std::cout << "liptok cli placeholder\n"; return 1; }
