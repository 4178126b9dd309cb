#pragma once

#include <string>
#include <vector>

#include "revgen/model.hpp"
#include "revgen/vocab.hpp"

namespace revgen {

struct Candidate {
    std::vector<std::string> tokens;
    std::vector<int> ids;  // generated ids, EOS excluded
    double score = 0.0;    // logprob / length^penalty
    double logprob = 0.0;
};

struct GenerateResult {
    std::vector<Candidate> candidates;  // descending score, distinct texts
    bool no_tag_warning = false;        // input lacked <review_tag>
};

struct DecodeOptions {
    int beam_width = 0;  // 0 -> max(k, 10)
    double length_penalty = 1.0;
    int max_out_len = 128;
};

// Beam search over the decoder. Duplicate texts are collapsed; at most k
// candidates are returned (fewer when the beam yields fewer distinct texts).
GenerateResult generate_topk(const ModelParameters& params, const Vocabulary& vocab,
                             const std::vector<int>& input_ids, int k,
                             const DecodeOptions& options);

// Greedy decode (beam of one), for quick evaluation loops.
std::vector<std::string> greedy_decode(const ModelParameters& params, const Vocabulary& vocab,
                                       const std::vector<int>& input_ids, int max_out_len);

}  // namespace revgen
