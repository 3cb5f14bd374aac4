#pragma once

#include <functional>
#include <vector>

#include "liptok/tensor.hpp"

namespace liptok {

// Wengert-list tape. Operations append a backward closure as they execute, so
// the record order is automatically topological; backward() replays the list
// once, in reverse. One tape per thread; a training run owns its thread's tape.
class Tape {
  public:
    static Tape& active();

    bool recording() const { return enabled_; }
    void push(std::function<void()> backward_fn);
    std::size_t size() const { return records_.size(); }

    // Seeds d(loss)/d(loss) = 1, replays every record in reverse order, then
    // clears the tape. `loss` must be a scalar with requires_grad.
    void backward(const Tensor& loss);
    void clear();

  private:
    friend class NoGradGuard;
    std::vector<std::function<void()>> records_;
    bool enabled_ = true;
};

// RAII guard disabling tape recording (evaluation / metric passes).
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// True when at least one input requires grad and recording is enabled.
inline bool grad_needed(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::active().recording()) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

}  // namespace liptok
