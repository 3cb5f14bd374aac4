#include "liptok/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "liptok/textio.hpp"

namespace liptok {

void Episode::validate() const {
    if (act_dim == 0 || obs_dim == 0) throw UsageError("episode with zero dims");
    if (obs.size() % obs_dim != 0 || act.size() % act_dim != 0 ||
        obs.size() / obs_dim != act.size() / act_dim) {
        throw UsageError("episode obs/act lengths disagree");
    }
    for (Scalar v : obs)
        if (!std::isfinite(v)) throw UsageError("non-finite observation value");
    for (Scalar v : act)
        if (!std::isfinite(v)) throw UsageError("non-finite action value");
}

std::string dataset_to_string(const std::vector<Episode>& episodes) {
    std::string out;
    for (const Episode& ep : episodes) {
        nlohmann::ordered_json j;
        j["task_id"] = ep.task_id;
        j["success"] = ep.success;
        nlohmann::ordered_json obs = nlohmann::ordered_json::array();
        nlohmann::ordered_json act = nlohmann::ordered_json::array();
        const std::size_t T = ep.length();
        for (std::size_t t = 0; t < T; ++t) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < ep.obs_dim; ++i) row.push_back(ep.obs[t * ep.obs_dim + i]);
            obs.push_back(std::move(row));
            nlohmann::ordered_json arow = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < ep.act_dim; ++i) arow.push_back(ep.act[t * ep.act_dim + i]);
            act.push_back(std::move(arow));
        }
        j["obs"] = std::move(obs);
        j["act"] = std::move(act);
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_dataset(const std::vector<Episode>& episodes, const std::string& path) {
    write_file_atomic(path, dataset_to_string(episodes));
}

std::vector<Episode> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);
    std::vector<Episode> episodes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        Episode ep;
        try {
            ep.task_id = j.at("task_id").get<std::string>();
            ep.success = j.at("success").get<bool>();
            const auto& obs = j.at("obs");
            const auto& act = j.at("act");
            if (obs.size() != act.size() || obs.empty()) {
                throw IoError("obs/act row counts disagree or empty");
            }
            ep.obs_dim = obs[0].size();
            ep.act_dim = act[0].size();
            for (const auto& row : obs) {
                if (row.size() != ep.obs_dim) throw IoError("ragged obs rows");
                for (const auto& v : row) ep.obs.push_back(v.get<double>());
            }
            for (const auto& row : act) {
                if (row.size() != ep.act_dim) throw IoError("ragged act rows");
                for (const auto& v : row) ep.act.push_back(v.get<double>());
            }
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        ep.validate();
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

Tensor dataset_actions(const std::vector<Episode>& episodes) {
    if (episodes.empty()) throw UsageError("empty dataset");
    const std::size_t a = episodes.front().act_dim;
    std::vector<Scalar> data;
    for (const Episode& ep : episodes) {
        if (ep.act_dim != a) throw UsageError("mixed action dims in dataset");
        data.insert(data.end(), ep.act.begin(), ep.act.end());
    }
    const std::size_t n = data.size() / a;
    return Tensor::from({n, a}, std::move(data));
}

namespace {

// Quintic minimum-jerk position profile on [0,1].
double min_jerk_sigma(double u) {
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

}  // namespace

std::vector<Episode> synth_minjerk(const MinJerkConfig& config, Rng& rng) {
    std::vector<Episode> episodes;
    episodes.reserve(config.episodes);
    for (int e = 0; e < config.episodes; ++e) {
        const int steps =
            config.min_steps + static_cast<int>(rng.uniform_index(
                                   static_cast<std::size_t>(config.max_steps - config.min_steps + 1)));
        const std::size_t dims = config.dims;
        // Per-dim window and endpoints.
        std::vector<double> start(dims), stop(dims), t0(dims), t1(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            start[d] = rng.uniform(-0.8, 0.8);
            stop[d] = rng.uniform(-0.8, 0.8);
            t0[d] = rng.uniform(0.0, config.window_jitter);
            t1[d] = rng.uniform(1.0 - config.window_jitter, 1.0);
        }
        Episode ep;
        ep.task_id = "minjerk";
        ep.success = true;
        ep.obs_dim = 1;  // placeholder observation channel (timestep fraction)
        ep.act_dim = dims;
        ep.obs.reserve(static_cast<std::size_t>(steps));
        ep.act.reserve(static_cast<std::size_t>(steps) * dims);
        auto pos = [&](std::size_t d, int t) {
            const double u = static_cast<double>(t) / static_cast<double>(steps);
            const double w = std::clamp((u - t0[d]) / (t1[d] - t0[d]), 0.0, 1.0);
            return start[d] + (stop[d] - start[d]) * min_jerk_sigma(w);
        };
        for (int t = 0; t < steps; ++t) {
            ep.obs.push_back(static_cast<Scalar>(t) / static_cast<Scalar>(steps));
            for (std::size_t d = 0; d < dims; ++d) {
                ep.act.push_back(static_cast<Scalar>(pos(d, t + 1) - pos(d, t)));
            }
        }
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

}  // namespace liptok
