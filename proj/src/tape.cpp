#include "liptok/tape.hpp"

namespace liptok {

Tape& Tape::active() {
    thread_local Tape tape;
    return tape;
}

void Tape::push(std::function<void()> backward_fn) {
    records_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw UsageError("backward() requires a scalar loss");
    }
    if (!loss.requires_grad()) {
        throw UsageError("backward() on a tensor that does not require grad");
    }
    loss.node()->grad[0] = Scalar{1};
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        (*it)();
    }
    clear();
}

void Tape::clear() { records_.clear(); }

NoGradGuard::NoGradGuard() : prev_(Tape::active().enabled_) {
    Tape::active().enabled_ = false;
}

NoGradGuard::~NoGradGuard() { Tape::active().enabled_ = prev_; }

}  // namespace liptok
