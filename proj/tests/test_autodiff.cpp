#include <cmath>

#include "doctest.h"
#include "liptok/optim.hpp"
#include "testutil.hpp"

using namespace liptok;
using testutil::check_gradients;
using testutil::random_tensor;

TEST_CASE("tensor shape and grad invariants") {
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    CHECK(t.numel() == 6);
    CHECK(t.grad().size() == 6);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);

    Tensor u = Tensor::zeros({4});
    CHECK(!u.requires_grad());
    CHECK_THROWS_AS(u.grad(), UsageError);
}

TEST_CASE("matmul identity and hand cases") {
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
    Tensor c = matmul(eye, b);
    for (std::size_t i = 0; i < 4; ++i) CHECK(c[i] == b[i]);

    Tensor row = Tensor::from({1, 2}, {1, 2});
    Tensor col = Tensor::from({2, 1}, {3, 4});
    CHECK(matmul(row, col).value() == doctest::Approx(11.0));
}

TEST_CASE("matmul shape error names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 3});
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2, 3]") != std::string::npos);
    }
}

TEST_CASE("matmul gradients match finite differences") {
    Rng rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor a = random_tensor({3, 4}, rng, true);
        Tensor b = random_tensor({4, 2}, rng, true);
        check_gradients([&] { return sum(matmul(a, b)); }, {a, b}, 1e-6);
    }
}

TEST_CASE("matmul_nt gradients match finite differences") {
    Rng rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor a = random_tensor({3, 4}, rng, true);
        Tensor b = random_tensor({5, 4}, rng, true);
        Tensor w = random_tensor({3, 5}, rng, false);
        check_gradients([&] { return sum(mul(matmul_nt(a, b), w)); }, {a, b}, 1e-6);
    }
}

TEST_CASE("elementwise ops gradients") {
    Rng rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor a = random_tensor({2, 3}, rng, true);
        Tensor b = random_tensor({2, 3}, rng, true);
        Tensor w = random_tensor({2, 3}, rng, false);
        check_gradients([&] { return sum(mul(add(a, b), w)); }, {a, b}, 1e-6);
        check_gradients([&] { return sum(mul(sub(a, b), w)); }, {a, b}, 1e-6);
        check_gradients([&] { return sum(mul(mul(a, b), w)); }, {a, b}, 1e-5);
        check_gradients([&] { return scale(sum(mul(a, a)), 0.5); }, {a}, 1e-5);
    }
}

TEST_CASE("add_rowwise broadcasts bias over rows") {
    Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor bias = Tensor::from({2}, {10, 20});
    Tensor out = add_rowwise(t, bias);
    CHECK(out[0] == 11);
    CHECK(out[3] == 24);

    Rng rng(14);
    Tensor x = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({4}, rng, true);
    Tensor w = random_tensor({3, 4}, rng, false);
    check_gradients([&] { return sum(mul(add_rowwise(x, b), w)); }, {x, b}, 1e-6);
}

TEST_CASE("relu forward and gradient") {
    Tensor t = Tensor::from({3}, {-1, 0, 2});
    Tensor out = relu(t);
    CHECK(out[0] == 0);
    CHECK(out[1] == 0);
    CHECK(out[2] == 2);

    Tensor neg = Tensor::from({3}, {-1, -2, -0.5}, true);
    Tensor loss = sum(relu(neg));
    Tape::active().backward(loss);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(relu(neg)[i] == 0);
        CHECK(neg.grad()[i] == 0);
    }

    // Away from the kink the analytic gradient matches finite differences.
    Rng rng(15);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor x = random_tensor({6}, rng, true);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            if (std::abs(x[i]) < 1e-3) x[i] = 0.5;
        }
        Tensor w = random_tensor({6}, rng, false);
        check_gradients([&] { return sum(mul(relu(x), w)); }, {x}, 1e-6);
    }
}

TEST_CASE("softplus analytic values and gradient") {
    Tensor z = Tensor::from({1}, {0});
    CHECK(softplus(z).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor big = Tensor::from({1}, {50});
    CHECK(std::abs(softplus(big).value() - 50.0) < 1e-12);

    Tensor one = Tensor::from({1}, {1}, true);
    Tensor loss = sum(softplus(one));
    Tape::active().backward(loss);
    const double sig1 = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(one.grad()[0] == doctest::Approx(sig1).epsilon(1e-12));

    Rng rng(16);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor x = random_tensor({5}, rng, true);
        Tensor w = random_tensor({5}, rng, false);
        check_gradients([&] { return sum(mul(softplus(x), w)); }, {x}, 1e-6);
    }
}

TEST_CASE("softmax_causal masking and normalization") {
    Tensor one = Tensor::from({1, 1}, {3.7});
    CHECK(softmax_causal(one).value() == doctest::Approx(1.0));

    Tensor uniform = Tensor::full({3, 3}, 0.25);
    Tensor p = softmax_causal(uniform);
    for (std::size_t r = 0; r < 3; ++r) {
        double row_sum = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            if (c > r) {
                CHECK(p.at(r, c) == 0.0);
            } else {
                CHECK(p.at(r, c) == doctest::Approx(1.0 / (r + 1)));
            }
            row_sum += p.at(r, c);
        }
        CHECK(row_sum == doctest::Approx(1.0));
    }
}

TEST_CASE("softmax_causal gradient matches finite differences") {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor scores = random_tensor({4, 4}, rng, true);
        Tensor w = random_tensor({4, 4}, rng, false);
        check_gradients([&] { return sum(mul(softmax_causal(scores), w)); }, {scores}, 1e-5);
    }
}

TEST_CASE("layernorm forward properties") {
    Tensor constant_row = Tensor::full({1, 8}, 3.25);
    Tensor gain = Tensor::full({8}, 1.0);
    Tensor bias = Tensor::zeros({8});
    Tensor out = layernorm(constant_row, gain, bias);
    for (std::size_t i = 0; i < 8; ++i) CHECK(out[i] == doctest::Approx(0.0));

    // High-variance row: output mean equals the bias mean contribution and the
    // variance equals gain^2 up to the eps in the denominator.
    Rng rng(18);
    Tensor x = random_tensor({1, 16}, rng, false, -20.0, 20.0);
    Tensor g2 = Tensor::full({16}, 1.5);
    Tensor b2 = Tensor::full({16}, 0.75);
    Tensor y = layernorm(x, g2, b2);
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 16; ++i) mean += y[i];
    mean /= 16;
    for (std::size_t i = 0; i < 16; ++i) var += (y[i] - mean) * (y[i] - mean);
    var /= 16;
    CHECK(std::abs(mean - 0.75) < 1e-9);
    CHECK(std::abs(var - 1.5 * 1.5) < 1e-4);
}

TEST_CASE("layernorm gradient matches finite differences") {
    Rng rng(19);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor x = random_tensor({3, 5}, rng, true);
        Tensor gain = random_tensor({5}, rng, true, 0.5, 1.5);
        Tensor bias = random_tensor({5}, rng, true);
        Tensor w = random_tensor({3, 5}, rng, false);
        check_gradients([&] { return sum(mul(layernorm(x, gain, bias), w)); }, {x, gain, bias},
                        1e-5);
    }
}

TEST_CASE("stop_gradient forward identity and zero gradient") {
    Tensor t = Tensor::from({3}, {1, 2, 3}, true);
    Tensor sg = stop_gradient(t);
    for (std::size_t i = 0; i < 3; ++i) CHECK(sg[i] == t[i]);
    CHECK(!sg.requires_grad());

    // loss = ||sg[a] - b||^2 leaves a untouched, moves b.
    Tensor a = Tensor::from({2}, {1, 2}, true);
    Tensor b = Tensor::from({2}, {0.5, 0.5}, true);
    Tensor d = sub(stop_gradient(a), b);
    Tensor loss = sum(mul(d, d));
    Tape::active().backward(loss);
    CHECK(a.grad()[0] == 0.0);
    CHECK(a.grad()[1] == 0.0);
    CHECK(b.grad()[0] != 0.0);
    CHECK(b.grad()[1] != 0.0);
}

TEST_CASE("stack select and concat gradients") {
    Rng rng(20);
    Tensor r0 = random_tensor({4}, rng, true);
    Tensor r1 = random_tensor({4}, rng, true);
    Tensor w = random_tensor({2, 4}, rng, false);
    std::vector<Tensor> rows = {r0, r1};
    check_gradients([&] { return sum(mul(stack_rows(rows), w)); }, {r0, r1}, 1e-6);

    Tensor m = random_tensor({3, 4}, rng, true);
    Tensor wr = random_tensor({4}, rng, false);
    check_gradients([&] { return sum(mul(select_row(m, 1), wr)); }, {m}, 1e-6);

    Tensor p0 = random_tensor({2, 3}, rng, true);
    Tensor p1 = random_tensor({2, 2}, rng, true);
    Tensor wc = random_tensor({2, 5}, rng, false);
    std::vector<Tensor> parts = {p0, p1};
    check_gradients([&] { return sum(mul(concat_cols(parts), wc)); }, {p0, p1}, 1e-6);
}

TEST_CASE("tape populates ancestors and only ancestors") {
    Tensor a = Tensor::from({2}, {1, 2}, true);
    Tensor b = Tensor::from({2}, {3, 4}, true);
    Tensor unrelated = Tensor::from({2}, {5, 6}, true);
    Tensor side = sum(unrelated);  // recorded but not an ancestor of the loss
    (void)side;
    Tensor c = add(a, b);
    Tensor loss = sum(mul(c, c));
    CHECK(c.requires_grad());
    Tape::active().backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(2.0 * (1 + 3)));
    CHECK(b.grad()[1] == doctest::Approx(2.0 * (2 + 4)));
    CHECK(unrelated.grad()[0] == 0.0);
    CHECK(unrelated.grad()[1] == 0.0);
    CHECK(Tape::active().size() == 0);  // backward clears the tape
}

TEST_CASE("no-grad guard suppresses recording") {
    Tensor a = Tensor::from({2}, {1, 2}, true);
    {
        NoGradGuard ng;
        Tensor out = mul(a, a);
        CHECK(!out.requires_grad());
        CHECK(Tape::active().size() == 0);
    }
    Tensor out = mul(a, a);
    CHECK(out.requires_grad());
    Tape::active().clear();
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from({3}, {1, 2, 3}, true);
    Adam opt({{"p", p}}, {.lr = 0.1, .warmup_steps = 0});
    opt.zero_grad();
    opt.step();
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 2.0);
    CHECK(p[2] == 3.0);
}

TEST_CASE("adam single hand-executed step") {
    Tensor p = Tensor::scalar(5.0, true);
    Adam opt({{"p", p}}, {.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .warmup_steps = 0});
    p.grad()[0] = 1.0;
    opt.step();
    // Bias-corrected first step moves by ~lr.
    CHECK(std::abs((5.0 - p[0]) - 0.1) < 1e-6);
}

TEST_CASE("adam converges on (w-3)^2") {
    Tensor w = Tensor::scalar(0.0, true);
    Adam opt({{"w", w}}, {.lr = 0.1, .warmup_steps = 0});
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        Tensor d = sub(w, Tensor::scalar(3.0));
        Tensor loss = sum(mul(d, d));
        Tape::active().backward(loss);
        opt.step();
    }
    CHECK(std::abs(w[0] - 3.0) < 1e-2);
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
    Tensor good = Tensor::scalar(1.0, true);
    Tensor bad = Tensor::scalar(2.0, true);
    Adam opt({{"good", good}, {"encoder.w", bad}}, {.warmup_steps = 0});
    good.grad()[0] = 0.5;
    bad.grad()[0] = std::numeric_limits<Scalar>::quiet_NaN();
    try {
        opt.step();
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("encoder.w") != std::string::npos);
    }
    // The aborted step must not have touched any parameter.
    CHECK(good[0] == 1.0);
    CHECK(bad[0] == 2.0);
}

TEST_CASE("training is bit-deterministic given identical seeds") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor w = random_tensor({4, 4}, rng, true);
        Tensor b = random_tensor({4}, rng, true);
        Adam opt({{"w", w}, {"b", b}}, {.lr = 1e-2, .warmup_steps = 10});
        Rng data = rng.child("data");
        for (int step = 0; step < 50; ++step) {
            opt.zero_grad();
            Tensor x = random_tensor({2, 4}, data, false);
            Tensor y = add_rowwise(matmul_nt(x, w), b);
            Tensor loss = mean(mul(y, y));
            Tape::active().backward(loss);
            opt.step();
        }
        std::vector<Scalar> out(w.values().begin(), w.values().end());
        out.insert(out.end(), b.values().begin(), b.values().end());
        return out;
    };
    const auto a = run(42);
    const auto b = run(42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
