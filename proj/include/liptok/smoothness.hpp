#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "liptok/tokenizer.hpp"

namespace liptok {

struct LatentTrajectory {
    Tensor points;  // [T, D], T >= 3
    std::string tokenizer_id;
    std::string episode_id;
};

// Discrete bending energy: with s̄ the mean consecutive-point distance,
//   E = Σ_t (‖z_{t+1} − 2 z_t + z_{t−1}‖² / s̄²)².
// Dimensionless, translation- and scale-invariant; 0 for collinear equally
// spaced points and for degenerate all-equal trajectories (s̄ = 0 guard).
// Lower is smoother.
Scalar least_energy_score(const Tensor& points);
inline Scalar least_energy_score(const LatentTrajectory& traj) {
    return least_energy_score(traj.points);
}

struct SmoothnessReport {
    struct Row {
        std::string tokenizer_id;
        double score = 0;  // mean of per-trajectory scores
        std::size_t trajectory_count = 0;
        std::vector<double> per_trajectory;
        bool untrained_warning = false;
    };
    std::vector<Row> rows;
    // Normalization metadata: per-trajectory scores are aggregated as a mean,
    // with mean-chord scale normalization inside the metric.
    std::string aggregation = "mean-of-per-trajectory-scores";
    std::string metric = "squared-second-differences, mean-chord normalized, scale-invariant";
};

// Encodes each episode's action sequence through every tokenizer (the same
// episodes for all of them) and aggregates least-energy scores.
SmoothnessReport compare_tokenizers(std::vector<std::pair<std::string, ActionTokenizer*>> tokenizers,
                                    const std::vector<Episode>& episodes,
                                    std::size_t n_trajectories = 500);

// Latent trajectories of one tokenizer over a set of episodes (one per
// episode, in order).
std::vector<LatentTrajectory> encode_trajectories(ActionTokenizer& tokenizer,
                                                  const std::vector<Episode>& episodes,
                                                  std::size_t limit, const std::string& id);

// Max over sampled input pairs of ‖f(x0) − f(x1)‖∞ / ‖x0 − x1‖∞. Coincident
// pairs are skipped.
Scalar empirical_lipschitz_ratio(const std::function<Tensor(const Tensor&)>& f,
                                 const Tensor& inputs, std::size_t n_pairs, Rng& rng);

struct Projection2D {
    std::vector<std::string> ids;                                  // per trajectory
    std::vector<std::vector<std::array<double, 2>>> polylines;     // per trajectory
    std::array<double, 2> variance_captured = {0, 0};              // eigenvalue shares
};

// Deterministic PCA onto the top-2 principal components of the pooled points
// (a reproducible stand-in for t-SNE). Rank-1 data pads the second axis with
// zeros.
Projection2D project_2d(const std::vector<LatentTrajectory>& trajectories);

// Spearman rank correlation with average ranks for ties; 0 when either side
// is entirely tied.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace liptok
