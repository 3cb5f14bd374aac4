#include <cmath>

#include "doctest.h"
#include "liptok/quantize.hpp"
#include "testutil.hpp"

using namespace liptok;
using testutil::random_tensor;

namespace {

Codebook make_codebook(std::size_t k, std::size_t d, std::vector<Scalar> entries) {
    Codebook cb;
    cb.entries = Tensor::from({k, d}, std::move(entries), true);
    cb.usage.assign(k, 0);
    return cb;
}

}  // namespace

TEST_CASE("vq_lookup picks the nearest entry") {
    Codebook cb = make_codebook(2, 2, {0, 0, 1, 1});
    Tensor x = Tensor::from({1, 2}, {0.2, 0.1});
    auto res = vq_lookup(cb, x);
    CHECK(res.indices[0] == 0);
    CHECK(res.quantized[0] == 0.0);
    CHECK(res.quantized[1] == 0.0);
    CHECK(res.commitment_loss.value() == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(cb.usage[0] == 1);
    Tape::active().clear();
}

TEST_CASE("vq_lookup on an exact entry is a fixed point with zero loss") {
    Codebook cb = make_codebook(4, 2, {0, 0, 1, 1, 2, 2, 3, 3});
    Tensor x = Tensor::from({1, 2}, {3, 3});
    auto res = vq_lookup(cb, x);
    CHECK(res.indices[0] == 3);
    CHECK(res.codebook_loss.value() == 0.0);
    CHECK(res.commitment_loss.value() == 0.0);
    Tape::active().clear();
}

TEST_CASE("vq_lookup breaks ties toward the lowest index") {
    Codebook cb = make_codebook(2, 2, {0, 0, 1, 1});
    Tensor x = Tensor::from({1, 2}, {0.5, 0.5});  // exactly equidistant
    auto res = vq_lookup(cb, x);
    CHECK(res.indices[0] == 0);
    Tape::active().clear();
}

TEST_CASE("vq_lookup empty batch returns an empty result") {
    Codebook cb = make_codebook(2, 2, {0, 0, 1, 1});
    Tensor x = Tensor::zeros({0, 2});
    auto res = vq_lookup(cb, x);
    CHECK(res.indices.empty());
    CHECK(res.quantized.dim(0) == 0);
    CHECK(res.codebook_loss.value() == 0.0);
}

TEST_CASE("vq_lookup dimension mismatch raises") {
    Codebook cb = make_codebook(2, 2, {0, 0, 1, 1});
    Tensor x = Tensor::zeros({1, 3});
    CHECK_THROWS_AS(vq_lookup(cb, x), ShapeError);
}

TEST_CASE("straight-through gradient equals the identity-spliced gradient") {
    Rng rng(51);
    Codebook cb = make_codebook(3, 2, {0, 0, 1, 1, -1, 0.5});
    Tensor latents = random_tensor({4, 2}, rng, true);
    Tensor probe = random_tensor({4, 2}, rng, false);

    latents.zero_grad();
    auto res = vq_lookup(cb, latents);
    Tensor loss = sum(mul(res.quantized, probe));
    Tape::active().backward(loss);
    std::vector<Scalar> st_grad(latents.grad().begin(), latents.grad().end());

    // Splice the quantizer out: same downstream graph applied to the latents
    // directly. The straight-through estimator must reproduce this gradient
    // exactly, as if z were the encoder output.
    latents.zero_grad();
    Tensor loss2 = sum(mul(latents, probe));
    Tape::active().backward(loss2);
    for (std::size_t i = 0; i < st_grad.size(); ++i) CHECK(st_grad[i] == latents.grad()[i]);
}

TEST_CASE("vq optimality against a brute-force oracle") {
    Rng rng(52);
    Codebook cb = Codebook::init(64, 4, rng);
    Tensor latents = random_tensor({200, 4}, rng, false, -0.05, 0.05);
    NoGradGuard ng;
    auto res = vq_lookup(cb, latents);
    for (std::size_t b = 0; b < 200; ++b) {
        // Independent oracle: scan all entries, strict-less comparison.
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < 64; ++j) {
            double dist = 0;
            for (std::size_t c = 0; c < 4; ++c) {
                const double diff = latents[b * 4 + c] - cb.entries[j * 4 + c];
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                best_j = j;
            }
        }
        CHECK(res.indices[b] == best_j);
        // No entry is strictly closer than the selected one.
        double sel = 0;
        for (std::size_t c = 0; c < 4; ++c) {
            const double diff = latents[b * 4 + c] - cb.entries[res.indices[b] * 4 + c];
            sel += diff * diff;
        }
        CHECK(sel <= best + 1e-15);
    }
}

TEST_CASE("codebook and commitment losses agree in value, differ in gradient targets") {
    Rng rng(53);
    Codebook cb = make_codebook(3, 2, {0.1, 0.2, 0.9, 1.0, -0.4, 0.3});
    Tensor latents = random_tensor({5, 2}, rng, true);

    auto res = vq_lookup(cb, latents);
    CHECK(res.codebook_loss.value() == res.commitment_loss.value());
    Tape::active().clear();

    // codebook_loss reaches only the entries
    cb.entries.zero_grad();
    latents.zero_grad();
    auto r1 = vq_lookup(cb, latents);
    Tape::active().backward(r1.codebook_loss);
    double entry_grad = 0, latent_grad = 0;
    for (Scalar g : cb.entries.grad()) entry_grad += std::abs(g);
    for (Scalar g : latents.grad()) latent_grad += std::abs(g);
    CHECK(entry_grad > 0);
    CHECK(latent_grad == 0);

    // commitment_loss reaches only the latents
    cb.entries.zero_grad();
    latents.zero_grad();
    auto r2 = vq_lookup(cb, latents);
    Tape::active().backward(r2.commitment_loss);
    entry_grad = latent_grad = 0;
    for (Scalar g : cb.entries.grad()) entry_grad += std::abs(g);
    for (Scalar g : latents.grad()) latent_grad += std::abs(g);
    CHECK(entry_grad == 0);
    CHECK(latent_grad > 0);
}

TEST_CASE("vq quantizing codebook entries is the identity") {
    Rng rng(54);
    Codebook cb = Codebook::init(8, 3, rng);
    NoGradGuard ng;
    Tensor entries_copy = cb.entries.clone();
    auto res = vq_lookup(cb, entries_copy);
    for (std::size_t b = 0; b < 8; ++b) CHECK(res.indices[b] == b);
    for (std::size_t i = 0; i < entries_copy.numel(); ++i)
        CHECK(res.quantized[i] == entries_copy[i]);
    CHECK(res.codebook_loss.value() == 0.0);
}

TEST_CASE("lfq sign-quantizes with msb-first binary index") {
    Tensor x = Tensor::from({1, 2}, {0.3, -0.2});
    auto res = lfq_quantize(x);
    CHECK(res.quantized[0] == 1.0);
    CHECK(res.quantized[1] == -1.0);
    CHECK(res.indices[0] == 2);  // pattern (+,-) reads as binary 10
    CHECK(res.codebook_loss.value() == 0.0);

    Tensor zero = Tensor::from({1, 2}, {0.0, 0.0});
    auto rz = lfq_quantize(zero);
    CHECK(rz.quantized[0] == 1.0);  // sign(0) = +1
    CHECK(rz.quantized[1] == 1.0);
    CHECK(rz.indices[0] == 3);
}

TEST_CASE("lfq is idempotent and bounds D") {
    Rng rng(55);
    Tensor x = random_tensor({6, 5}, rng, false);
    NoGradGuard ng;
    auto once = lfq_quantize(x);
    auto twice = lfq_quantize(once.quantized);
    for (std::size_t i = 0; i < once.quantized.numel(); ++i)
        CHECK(twice.quantized[i] == once.quantized[i]);
    CHECK(twice.indices == once.indices);

    Tensor wide = Tensor::zeros({1, 31});
    CHECK_THROWS_AS(lfq_quantize(wide), UsageError);
}

TEST_CASE("bin encode endpoints, center convention and round trips") {
    BinSpec spec = BinSpec::uniform(1, 256, -1, 1);
    CHECK(bin_encode(std::vector<Scalar>{-1}, spec)[0] == 0);
    CHECK(bin_encode(std::vector<Scalar>{1}, spec)[0] == 255);
    CHECK(bin_encode(std::vector<Scalar>{2.5}, spec)[0] == 255);  // clamps
    CHECK(bin_encode(std::vector<Scalar>{-7}, spec)[0] == 0);

    const auto idx = bin_encode(std::vector<Scalar>{0}, spec);
    CHECK(idx[0] == 128);
    CHECK(bin_decode(idx, spec)[0] == 0.00390625);  // right-of-center convention

    Rng rng(56);
    BinSpec spec4 = BinSpec::uniform(4, 256, -1, 1);
    const double half_bin = (2.0 / 256) / 2.0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<Scalar> x(4);
        for (auto& v : x) v = rng.uniform(-1.5, 1.5);
        const auto enc = bin_encode(x, spec4);
        const auto dec = bin_decode(enc, spec4);
        const auto re_enc = bin_encode(dec, spec4);
        CHECK(re_enc == enc);
        for (std::size_t i = 0; i < 4; ++i) {
            const double clamped = std::clamp(double(x[i]), -1.0, 1.0);
            CHECK(std::abs(dec[i] - clamped) <= half_bin + 1e-12);
        }
    }
}

TEST_CASE("codebook perplexity") {
    Rng rng(57);
    Codebook cb = Codebook::init(8, 2, rng);
    CHECK_THROWS_AS(codebook_perplexity(cb), UsageError);

    for (std::size_t i = 0; i < 8; ++i) cb.usage[i] = 5;
    CHECK(codebook_perplexity(cb) == doctest::Approx(8.0).epsilon(1e-12));

    cb.usage.assign(8, 0);
    cb.usage[2] = 17;
    CHECK(codebook_perplexity(cb) == doctest::Approx(1.0).epsilon(1e-12));

    Codebook two = Codebook::init(2, 2, rng);
    two.usage = {3, 1};
    CHECK(codebook_perplexity(two) == doctest::Approx(1.7548).epsilon(1e-3));
}
