#pragma once

#include "liptok/dataset.hpp"

namespace liptok {

// One slot of the interleaved token stream: prompt section alternates
// observation/action tokens, the query section is observation tokens only
// (the action-prediction slots).
struct SeqToken {
    bool is_action = false;
    bool is_prompt = false;
    std::size_t t = 0;  // timestep within its episode
};

struct EpisodeSequence {
    Episode prompt;
    Episode query;
    std::vector<SeqToken> tokens;    // length 2M + N
    std::vector<bool> loss_mask;     // true exactly on query observation slots
    std::size_t prompt_len() const { return prompt.length(); }
    std::size_t query_len() const { return query.length(); }
};

// Eq-1 style stream: (o_p1, a_p1, ..., o_pM, a_pM), (o_q1, ..., o_qN). The
// prompt must be a non-empty successful demonstration.
EpisodeSequence build_sequence(const Episode& prompt, const Episode& query);

}  // namespace liptok
