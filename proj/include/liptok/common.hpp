#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace liptok {

// Scalar precision for all tensor math. Gradient checks and the acceptance
// suite assume the 64-bit build; -DLIPTOK_SCALAR_F32 switches training builds
// to 32-bit storage.
#ifdef LIPTOK_SCALAR_F32
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/dimension mismatches between operands.
struct ShapeError : Error {
    using Error::Error;
};

// API misuse (bad argument, wrong tokenizer kind, missing precondition).
struct UsageError : Error {
    using Error::Error;
};

// Non-finite values or divergence during a training step.
struct TrainingError : Error {
    using Error::Error;
};

// Malformed, truncated or corrupted checkpoint/dataset files.
struct IoError : Error {
    using Error::Error;
};

std::string shape_to_string(const Shape& s);
std::size_t shape_numel(const Shape& s);

}  // namespace liptok
