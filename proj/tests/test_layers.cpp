#include <cmath>

#include "doctest.h"
#include "liptok/layers.hpp"
#include "testutil.hpp"

using namespace liptok;
using testutil::check_gradients;
using testutil::random_tensor;

namespace {

Tensor bound_for(Scalar softplus_value) {
    return Tensor::scalar(softplus_inverse(softplus_value), true);
}

double inf_norm_diff(std::span<const Scalar> a, std::span<const Scalar> b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i] - b[i])));
    return m;
}

}  // namespace

TEST_CASE("lipschitz_normalize rescales rows above the bound") {
    Tensor w = Tensor::from({1, 2}, {3, -1}, true);
    Tensor c = bound_for(2.0);
    Tensor out = lipschitz_normalize(w, c);
    CHECK(out[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(-0.5).epsilon(1e-12));
    Tape::active().clear();
}

TEST_CASE("lipschitz_normalize leaves compliant rows untouched bit-for-bit") {
    Tensor w = Tensor::from({1, 2}, {0.5, 0.5});
    Tensor c = bound_for(2.0);
    Tensor out = lipschitz_normalize(w, c);
    CHECK(out[0] == w[0]);
    CHECK(out[1] == w[1]);
}

TEST_CASE("lipschitz_normalize passes zero rows through") {
    Tensor w = Tensor::zeros({2, 3});
    Tensor c = Tensor::scalar(-5.0);  // softplus(-5) tiny but positive
    Tensor out = lipschitz_normalize(w, c);
    for (std::size_t i = 0; i < 6; ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("lipschitz_normalize is exactly idempotent") {
    Rng rng(31);
    Tensor w = random_tensor({8, 16}, rng, false);
    Tensor c = bound_for(0.75);
    NoGradGuard ng;
    Tensor once = lipschitz_normalize(w, c);
    Tensor twice = lipschitz_normalize(once, c);
    for (std::size_t i = 0; i < once.numel(); ++i) CHECK(twice[i] == once[i]);
}

TEST_CASE("lipschitz_normalize no-op regime is bit-identical") {
    Rng rng(32);
    Tensor w = random_tensor({6, 4}, rng, false, -0.01, 0.01);
    Tensor c = bound_for(1.0);
    Tensor out = lipschitz_normalize(w, c);
    for (std::size_t i = 0; i < w.numel(); ++i) CHECK(out[i] == w[i]);
}

TEST_CASE("lipschitz_normalize gradients match finite differences") {
    Rng rng(33);
    for (int rep = 0; rep < 10; ++rep) {
        // Rows well above the bound so the FD probe stays on the scaled branch.
        Tensor w = random_tensor({3, 4}, rng, true, 0.5, 2.0);
        Tensor c = Tensor::scalar(rng.uniform(-0.5, 0.5), true);
        Tensor probe = random_tensor({3, 4}, rng, false);
        check_gradients([&] { return sum(mul(lipschitz_normalize(w, c), probe)); }, {w, c}, 1e-5);
    }
}

TEST_CASE("lipschitz linear forward restricted identity") {
    LipschitzLinear layer;
    layer.weight = Tensor::from({2, 3}, {1, 0, 0, 0, 1, 0}, true);
    layer.bias = Tensor::zeros({2}, true);
    layer.raw_bound = bound_for(1.5);
    Tensor x = Tensor::from({1, 3}, {0.3, -0.8, 0.5});
    Tensor y = layer.forward(x);
    CHECK(y[0] == doctest::Approx(0.3));
    CHECK(y[1] == doctest::Approx(-0.8));
    Tape::active().clear();
}

TEST_CASE("lipschitz linear obeys its bound on random pairs") {
    Rng rng(34);
    LipschitzLinear layer = LipschitzLinear::init(6, 5, rng);
    layer.raw_bound = bound_for(0.8);  // force rescaling
    NoGradGuard ng;
    const double sp = layer.bound();
    for (int i = 0; i < 1000; ++i) {
        Tensor x0 = random_tensor({1, 6}, rng, false);
        Tensor x1 = random_tensor({1, 6}, rng, false);
        Tensor y0 = layer.forward(x0);
        Tensor y1 = layer.forward(x1);
        const double out_d = inf_norm_diff(y0.values(), y1.values());
        const double in_d = inf_norm_diff(x0.values(), x1.values());
        CHECK(out_d <= sp * in_d + 1e-9);
    }
}

TEST_CASE("saturated rows with zero bias scale linearly") {
    Rng rng(35);
    LipschitzLinear layer;
    layer.weight = random_tensor({4, 4}, rng, false, 1.0, 2.0);  // row sums >> bound
    layer.bias = Tensor::zeros({4});
    layer.raw_bound = bound_for(0.5);
    NoGradGuard ng;
    Tensor x = random_tensor({1, 4}, rng, false);
    Tensor scaled_x = scale(x, 2.5);
    Tensor y = layer.forward(x);
    Tensor y2 = layer.forward(scaled_x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(y2[i] == doctest::Approx(2.5 * y[i]).epsilon(1e-12));
}

TEST_CASE("network_lipschitz_bound is the product of per-layer bounds") {
    Rng rng(36);
    MLPStack stack = MLPStack::init({3, 4, 2}, true, rng);
    stack.constrained[0].raw_bound = bound_for(1.0);
    stack.constrained[1].raw_bound = bound_for(2.0);
    CHECK(stack.network_lipschitz_bound() == doctest::Approx(2.0).epsilon(1e-12));

    MLPStack single = MLPStack::init({3, 2}, true, rng);
    single.constrained[0].raw_bound = bound_for(0.7);
    CHECK(single.network_lipschitz_bound() == doctest::Approx(0.7).epsilon(1e-12));

    MLPStack plain = MLPStack::init({3, 2}, false, rng);
    CHECK_THROWS_AS(plain.network_lipschitz_bound(), UsageError);
    CHECK_THROWS_AS(plain.lipschitz_loss(), UsageError);
}

TEST_CASE("constrained stack never exceeds its bound empirically") {
    Rng rng(37);
    MLPStack stack = MLPStack::init({5, 8, 8, 3}, true, rng);
    // Tighten bounds so rescaling is active in every layer.
    for (auto& layer : stack.constrained) layer.raw_bound = bound_for(1.2);
    NoGradGuard ng;
    const double bound = stack.network_lipschitz_bound();
    double worst_ratio = 0;
    for (int i = 0; i < 1000; ++i) {
        Tensor x0 = random_tensor({1, 5}, rng, false);
        Tensor x1 = random_tensor({1, 5}, rng, false);
        const double in_d = inf_norm_diff(x0.values(), x1.values());
        if (in_d == 0) continue;
        const double out_d =
            inf_norm_diff(stack.forward(x0).values(), stack.forward(x1).values());
        worst_ratio = std::max(worst_ratio, out_d / in_d);
        CHECK(out_d <= bound * in_d + 1e-9);
    }
    CHECK(worst_ratio <= bound + 1e-9);

    // Adversarially aligned pair: step along the sign pattern of a saturated
    // first-layer row.
    Tensor w_eff = stack.constrained[0].effective_weight();
    Tensor x0 = Tensor::zeros({1, 5});
    Tensor x1 = Tensor::zeros({1, 5});
    for (std::size_t j = 0; j < 5; ++j) {
        x1[j] = w_eff.at(0, j) >= 0 ? Scalar{1} : Scalar{-1};
    }
    const double out_d = inf_norm_diff(stack.forward(x0).values(), stack.forward(x1).values());
    CHECK(out_d <= bound * 1.0 + 1e-9);
}

TEST_CASE("lipschitz_loss value and gradient") {
    Rng rng(38);
    MLPStack stack = MLPStack::init({3, 4, 4, 2}, true, rng);
    for (auto& layer : stack.constrained) layer.raw_bound = bound_for(1.0);
    CHECK(stack.lipschitz_loss().value() == doctest::Approx(1.0).epsilon(1e-12));
    Tape::active().clear();

    // d(loss)/dc_0 = sigmoid(c_0) * prod_{l != 0} softplus(c_l)
    stack.constrained[0].raw_bound = Tensor::scalar(0.3, true);
    stack.constrained[1].raw_bound = Tensor::scalar(-0.2, true);
    stack.constrained[2].raw_bound = Tensor::scalar(0.9, true);
    Tensor loss = stack.lipschitz_loss();
    Tape::active().backward(loss);
    auto sp = [](double x) { return std::log1p(std::exp(x)); };
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    const double expect = sig(0.3) * sp(-0.2) * sp(0.9);
    CHECK(stack.constrained[0].raw_bound.grad()[0] == doctest::Approx(expect).epsilon(1e-10));

    check_gradients([&] { return stack.lipschitz_loss(); },
                    {stack.constrained[0].raw_bound, stack.constrained[1].raw_bound,
                     stack.constrained[2].raw_bound},
                    1e-6);
}

TEST_CASE("minimizing lipschitz_loss alone shrinks every bound monotonically") {
    Rng rng(39);
    MLPStack stack = MLPStack::init({4, 6, 4}, true, rng);
    Adam opt(stack.params("enc"), {.lr = 0.05, .warmup_steps = 0});
    std::vector<double> prev;
    for (const auto& layer : stack.constrained) prev.push_back(layer.bound());
    for (int step = 0; step < 50; ++step) {
        opt.zero_grad();
        Tensor loss = stack.lipschitz_loss();
        Tape::active().backward(loss);
        opt.step();
        for (std::size_t l = 0; l < stack.constrained.size(); ++l) {
            const double now = stack.constrained[l].bound();
            CHECK(now < prev[l]);
            prev[l] = now;
        }
    }
}

TEST_CASE("initialization starts as a no-op and respects the row-sum invariant") {
    Rng rng(40);
    LipschitzLinear layer = LipschitzLinear::init(16, 8, rng);
    NoGradGuard ng;
    Tensor eff = layer.effective_weight();
    for (std::size_t i = 0; i < eff.numel(); ++i) CHECK(eff[i] == layer.weight[i]);

    const double sp = layer.bound();
    for (std::size_t r = 0; r < 8; ++r) {
        double row_sum = 0;
        for (std::size_t j = 0; j < 16; ++j) row_sum += std::abs(double(eff.at(r, j)));
        CHECK(row_sum <= sp + 1e-9);
    }
}

TEST_CASE("softplus_inverse round-trips") {
    for (double y : {1e-3, 0.5, 1.0, 2.0, 10.0, 40.0}) {
        const double c = softplus_inverse(y);
        const double back = std::max(c, 0.0) + std::log1p(std::exp(-std::abs(c)));
        CHECK(back == doctest::Approx(y).epsilon(1e-9));
    }
    CHECK_THROWS_AS(softplus_inverse(0.0), UsageError);
}
