#pragma once

#include <string>
#include <vector>

#include "liptok/tensor.hpp"

namespace liptok {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

struct AdamConfig {
    Scalar lr = Scalar{1e-4};
    Scalar beta1 = Scalar{0.9};
    Scalar beta2 = Scalar{0.95};
    Scalar eps = Scalar{1e-8};
    // Linear learning-rate warmup over this many steps (0 disables).
    int warmup_steps = 100;
};

// Standard Adam with bias correction. step() validates every gradient before
// touching any parameter; a non-finite gradient aborts the whole step and
// names the offending parameter.
class Adam {
  public:
    Adam(std::vector<NamedParam> params, AdamConfig config = {});

    void step();
    void zero_grad();
    std::int64_t step_count() const { return step_count_; }
    const std::vector<NamedParam>& params() const { return params_; }

  private:
    std::vector<NamedParam> params_;
    AdamConfig config_;
    std::vector<std::vector<Scalar>> m_, v_;
    std::int64_t step_count_ = 0;
};

}  // namespace liptok
