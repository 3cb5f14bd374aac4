#include "liptok/sequence.hpp"

namespace liptok {

EpisodeSequence build_sequence(const Episode& prompt, const Episode& query) {
    if (prompt.length() == 0) throw UsageError("build_sequence: empty prompt episode");
    if (query.length() == 0) throw UsageError("build_sequence: empty query episode");
    if (!prompt.success) throw UsageError("build_sequence: prompt must be a successful episode");
    EpisodeSequence seq;
    seq.prompt = prompt;
    seq.query = query;
    const std::size_t m = prompt.length(), n = query.length();
    seq.tokens.reserve(2 * m + n);
    seq.loss_mask.reserve(2 * m + n);
    for (std::size_t t = 0; t < m; ++t) {
        seq.tokens.push_back({false, true, t});
        seq.loss_mask.push_back(false);
        seq.tokens.push_back({true, true, t});
        seq.loss_mask.push_back(false);
    }
    for (std::size_t t = 0; t < n; ++t) {
        seq.tokens.push_back({false, false, t});
        seq.loss_mask.push_back(true);
    }
    return seq;
}

}  // namespace liptok
