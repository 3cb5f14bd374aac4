#include "liptok/optim.hpp"

#include <cmath>

namespace liptok {

Adam::Adam(std::vector<NamedParam> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    for (const NamedParam& p : params_) {
        if (!p.tensor.requires_grad()) {
            throw UsageError("Adam: parameter '" + p.name + "' does not require grad");
        }
        m_.emplace_back(p.tensor.numel(), Scalar{0});
        v_.emplace_back(p.tensor.numel(), Scalar{0});
    }
}

void Adam::step() {
    for (const NamedParam& p : params_) {
        for (Scalar g : p.tensor.grad()) {
            if (!std::isfinite(g)) {
                throw TrainingError("non-finite gradient in parameter '" + p.name + "'");
            }
        }
    }
    ++step_count_;
    Scalar lr = config_.lr;
    if (config_.warmup_steps > 0 && step_count_ < config_.warmup_steps) {
        lr *= static_cast<Scalar>(step_count_) / static_cast<Scalar>(config_.warmup_steps);
    }
    const Scalar bc1 = Scalar{1} - std::pow(config_.beta1, static_cast<Scalar>(step_count_));
    const Scalar bc2 = Scalar{1} - std::pow(config_.beta2, static_cast<Scalar>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto vals = params_[i].tensor.values();
        auto grads = params_[i].tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < vals.size(); ++j) {
            const Scalar g = grads[j];
            m[j] = config_.beta1 * m[j] + (Scalar{1} - config_.beta1) * g;
            v[j] = config_.beta2 * v[j] + (Scalar{1} - config_.beta2) * g * g;
            const Scalar mhat = m[j] / bc1;
            const Scalar vhat = v[j] / bc2;
            vals[j] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (NamedParam& p : params_) p.tensor.zero_grad();
}

}  // namespace liptok
