#include "liptok/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace liptok {

Scalar least_energy_score(const Tensor& points) {
    if (points.rank() != 2 || points.dim(0) < 3) {
        throw UsageError("least_energy_score: need a [T>=3, D] trajectory, got " +
                         shape_to_string(points.shape()));
    }
    const std::size_t T = points.dim(0), d = points.dim(1);
    for (Scalar v : points.values()) {
        if (!std::isfinite(v)) throw UsageError("least_energy_score: non-finite trajectory");
    }
    double chord_sum = 0;
    for (std::size_t t = 0; t + 1 < T; ++t) {
        double c = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = points[(t + 1) * d + j] - points[t * d + j];
            c += diff * diff;
        }
        chord_sum += std::sqrt(c);
    }
    const double mean_chord = chord_sum / static_cast<double>(T - 1);
    if (mean_chord == 0.0) return 0;  // all points identical
    const double s2 = mean_chord * mean_chord;
    double energy = 0;
    for (std::size_t t = 1; t + 1 < T; ++t) {
        double second = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff =
                points[(t + 1) * d + j] - 2.0 * points[t * d + j] + points[(t - 1) * d + j];
            second += diff * diff;
        }
        const double ratio = second / s2;
        energy += ratio * ratio;
    }
    return static_cast<Scalar>(energy);
}

std::vector<LatentTrajectory> encode_trajectories(ActionTokenizer& tokenizer,
                                                  const std::vector<Episode>& episodes,
                                                  std::size_t limit, const std::string& id) {
    NoGradGuard ng;
    std::vector<LatentTrajectory> out;
    const std::size_t n = std::min(limit, episodes.size());
    out.reserve(n);
    for (std::size_t e = 0; e < n; ++e) {
        const Episode& ep = episodes[e];
        Tensor actions = Tensor::from({ep.length(), ep.act_dim}, ep.act);
        TokenizerOutput tok = tokenizer.tokenize(actions);
        out.push_back({tok.token, id, ep.task_id + "#" + std::to_string(e)});
    }
    return out;
}

SmoothnessReport compare_tokenizers(std::vector<std::pair<std::string, ActionTokenizer*>> tokenizers,
                                    const std::vector<Episode>& episodes,
                                    std::size_t n_trajectories) {
    if (episodes.size() < n_trajectories) {
        throw UsageError("compare_tokenizers: dataset supplies " + std::to_string(episodes.size()) +
                         " episodes, need " + std::to_string(n_trajectories));
    }
    SmoothnessReport report;
    for (auto& [id, tok] : tokenizers) {
        SmoothnessReport::Row row;
        row.tokenizer_id = id;
        row.untrained_warning = tok->trained_steps == 0;
        const auto trajs = encode_trajectories(*tok, episodes, n_trajectories, id);
        double total = 0;
        for (const auto& traj : trajs) {
            const double e = least_energy_score(traj);
            row.per_trajectory.push_back(e);
            total += e;
        }
        row.trajectory_count = trajs.size();
        row.score = trajs.empty() ? 0 : total / static_cast<double>(trajs.size());
        report.rows.push_back(std::move(row));
    }
    return report;
}

Scalar empirical_lipschitz_ratio(const std::function<Tensor(const Tensor&)>& f,
                                 const Tensor& inputs, std::size_t n_pairs, Rng& rng) {
    if (n_pairs < 1) throw UsageError("empirical_lipschitz_ratio: n_pairs must be >= 1");
    if (inputs.rank() != 2 || inputs.dim(0) < 2) {
        throw UsageError("empirical_lipschitz_ratio: need at least two inputs");
    }
    NoGradGuard ng;
    const std::size_t n = inputs.dim(0), a = inputs.dim(1);
    double worst = 0;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t i = rng.uniform_index(n);
        std::size_t j = rng.uniform_index(n);
        if (j == i) j = (j + 1) % n;
        Tensor x0 = Tensor::from({1, a}, {inputs.values().begin() + static_cast<std::ptrdiff_t>(i * a),
                                          inputs.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * a)});
        Tensor x1 = Tensor::from({1, a}, {inputs.values().begin() + static_cast<std::ptrdiff_t>(j * a),
                                          inputs.values().begin() + static_cast<std::ptrdiff_t>((j + 1) * a)});
        double in_d = 0;
        for (std::size_t c = 0; c < a; ++c) in_d = std::max(in_d, std::abs(double(x0[c] - x1[c])));
        if (in_d == 0) continue;  // coincident pair
        Tensor y0 = f(x0);
        Tensor y1 = f(x1);
        double out_d = 0;
        for (std::size_t c = 0; c < y0.numel(); ++c)
            out_d = std::max(out_d, std::abs(double(y0[c] - y1[c])));
        worst = std::max(worst, out_d / in_d);
    }
    return static_cast<Scalar>(worst);
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
// descending with matching eigenvectors as columns.
void jacobi_eigen(std::vector<double> m, std::size_t d, std::vector<double>& eigenvalues,
                  std::vector<double>& eigenvectors) {
    std::vector<double> v(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += m[p * d + q] * m[p * d + q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = m[p * d + q];
                if (std::abs(apq) < 1e-18) continue;
                const double app = m[p * d + p], aqq = m[q * d + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double mkp = m[k * d + p], mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double mpk = m[p * d + k], mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v[k * d + p], vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(d);
    for (std::size_t i = 0; i < d; ++i) diag[i] = m[i * d + i];
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return diag[a] > diag[b]; });
    eigenvalues.assign(d, 0.0);
    eigenvectors.assign(d * d, 0.0);
    for (std::size_t col = 0; col < d; ++col) {
        eigenvalues[col] = std::max(diag[order[col]], 0.0);
        // Deterministic sign: largest-magnitude component positive.
        std::size_t arg = 0;
        double best = 0;
        for (std::size_t k = 0; k < d; ++k) {
            const double mag = std::abs(v[k * d + order[col]]);
            if (mag > best) {
                best = mag;
                arg = k;
            }
        }
        const double sign = v[arg * d + order[col]] >= 0 ? 1.0 : -1.0;
        for (std::size_t k = 0; k < d; ++k) eigenvectors[k * d + col] = sign * v[k * d + order[col]];
    }
}

}  // namespace

Projection2D project_2d(const std::vector<LatentTrajectory>& trajectories) {
    if (trajectories.empty()) throw UsageError("project_2d: no trajectories");
    const std::size_t d = trajectories.front().points.dim(1);
    std::size_t total = 0;
    for (const auto& t : trajectories) {
        if (t.points.dim(1) != d) throw ShapeError("project_2d: mixed latent dims");
        total += t.points.dim(0);
    }
    std::vector<double> mean(d, 0.0);
    for (const auto& t : trajectories)
        for (std::size_t r = 0; r < t.points.dim(0); ++r)
            for (std::size_t c = 0; c < d; ++c) mean[c] += t.points[r * d + c];
    for (double& v : mean) v /= static_cast<double>(total);

    std::vector<double> cov(d * d, 0.0);
    for (const auto& t : trajectories) {
        for (std::size_t r = 0; r < t.points.dim(0); ++r) {
            for (std::size_t i = 0; i < d; ++i) {
                const double xi = t.points[r * d + i] - mean[i];
                for (std::size_t j = i; j < d; ++j) {
                    cov[i * d + j] += xi * (t.points[r * d + j] - mean[j]);
                }
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i * d + j] /= static_cast<double>(total);
            cov[j * d + i] = cov[i * d + j];
        }

    std::vector<double> eigenvalues, eigenvectors;
    jacobi_eigen(cov, d, eigenvalues, eigenvectors);

    double trace = 0;
    for (double e : eigenvalues) trace += e;
    Projection2D out;
    out.variance_captured = {trace > 0 ? eigenvalues[0] / trace : 0.0,
                             trace > 0 && d > 1 ? eigenvalues[1] / trace : 0.0};
    for (const auto& t : trajectories) {
        std::vector<std::array<double, 2>> line;
        line.reserve(t.points.dim(0));
        for (std::size_t r = 0; r < t.points.dim(0); ++r) {
            std::array<double, 2> p = {0.0, 0.0};
            for (int axis = 0; axis < 2; ++axis) {
                if (static_cast<std::size_t>(axis) >= d) break;  // pad with zeros
                double acc = 0;
                for (std::size_t c = 0; c < d; ++c) {
                    acc += (t.points[r * d + c] - mean[c]) * eigenvectors[c * d + axis];
                }
                p[axis] = acc;
            }
            line.push_back(p);
        }
        out.polylines.push_back(std::move(line));
        out.ids.push_back(t.tokenizer_id + "/" + t.episode_id);
    }
    return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw UsageError("spearman: need two equal-length series of size >= 2");
    }
    auto ranks = [](const std::vector<double>& x) {
        const std::size_t n = x.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
        std::vector<double> r(n, 0.0);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0 || vb == 0) return 0.0;  // fully tied on one side
    return cov / std::sqrt(va * vb);
}

}  // namespace liptok
