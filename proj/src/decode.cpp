#include "revgen/decode.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "revgen/errors.hpp"
#include "revgen/textprep.hpp"

namespace revgen {

namespace {

struct Hypothesis {
    std::vector<int> dec_ids;  // starts with the PAD start token
    double logprob = 0.0;
};

double hyp_score(double logprob, size_t emitted, double penalty) {
    double len = std::max<size_t>(1, emitted);
    return logprob / std::pow(len, penalty);
}

std::vector<std::string> ids_to_tokens(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::vector<std::string> tokens;
    for (int id : ids) {
        if (id == Vocabulary::kPad || id == Vocabulary::kEos) continue;
        tokens.push_back(vocab.token_of(id));
    }
    return tokens;
}

}  // namespace

GenerateResult generate_topk(const ModelParameters& params, const Vocabulary& vocab,
                             const std::vector<int>& input_ids, int k,
                             const DecodeOptions& options) {
    if (input_ids.empty()) throw EmptyInputError("generate: empty input");
    if (k < 1) throw Error("generate: k must be >= 1");

    GenerateResult result;
    result.no_tag_warning =
        std::find(input_ids.begin(), input_ids.end(), Vocabulary::kReviewTag) == input_ids.end();

    const int width = std::max(options.beam_width > 0 ? options.beam_width : 10, k);
    const Mat enc_out = encode_sequence(params, input_ids);
    const auto vocab_size = static_cast<int>(vocab.size());

    std::vector<Hypothesis> active = {Hypothesis{{Vocabulary::kPad}, 0.0}};
    // finished candidates: (generated ids without EOS, logprob)
    std::vector<std::pair<std::vector<int>, double>> finished;

    for (int step = 0; step < options.max_out_len && !active.empty(); ++step) {
        struct Expansion {
            size_t hyp;
            int token;
            double logprob;
        };
        std::vector<Expansion> expansions;
        expansions.reserve(active.size() * static_cast<size_t>(vocab_size));

        for (size_t h = 0; h < active.size(); ++h) {
            Mat logits = decoder_logits_cached(params, enc_out, active[h].dec_ids);
            Eigen::Index last = logits.rows() - 1;
            double mx = logits.row(last).maxCoeff();
            Eigen::ArrayXd e = (logits.row(last).array() - mx).exp();
            double lse = mx + std::log(e.sum());
            for (int t = 0; t < vocab_size; ++t) {
                expansions.push_back({h, t, active[h].logprob + logits(last, t) - lse});
            }
        }
        const size_t keep = std::min(expansions.size(), static_cast<size_t>(width) * 2);
        std::partial_sort(expansions.begin(), expansions.begin() + static_cast<long>(keep),
                          expansions.end(), [](const Expansion& a, const Expansion& b) {
                              return a.logprob != b.logprob ? a.logprob > b.logprob
                                                            : (a.hyp != b.hyp ? a.hyp < b.hyp
                                                                              : a.token < b.token);
                          });

        std::vector<Hypothesis> next;
        for (size_t i = 0; i < keep && next.size() < static_cast<size_t>(width); ++i) {
            const Expansion& ex = expansions[i];
            if (ex.token == Vocabulary::kEos) {
                std::vector<int> emitted(active[ex.hyp].dec_ids.begin() + 1,
                                         active[ex.hyp].dec_ids.end());
                finished.emplace_back(std::move(emitted), ex.logprob);
                continue;
            }
            Hypothesis h = active[ex.hyp];
            h.dec_ids.push_back(ex.token);
            h.logprob = ex.logprob;
            next.push_back(std::move(h));
        }
        active = std::move(next);
    }
    // length limit reached: close out whatever is still active
    for (const auto& h : active) {
        std::vector<int> emitted(h.dec_ids.begin() + 1, h.dec_ids.end());
        finished.emplace_back(emitted, h.logprob);
    }

    // collapse duplicates after detokenization, keep the best score
    std::map<std::string, Candidate> best;
    for (auto& [ids, logprob] : finished) {
        Candidate c;
        c.ids = ids;
        c.tokens = ids_to_tokens(ids, vocab);
        c.logprob = logprob;
        // score over emitted length including the stop token
        c.score = hyp_score(logprob, ids.size() + 1, options.length_penalty);
        std::string key = detokenize(c.tokens);
        auto it = best.find(key);
        if (it == best.end() || c.score > it->second.score) {
            best[key] = std::move(c);
        }
    }
    for (auto& [key, cand] : best) result.candidates.push_back(std::move(cand));
    std::sort(result.candidates.begin(), result.candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.tokens < b.tokens;
              });
    if (result.candidates.size() > static_cast<size_t>(k)) {
        result.candidates.resize(static_cast<size_t>(k));
    }
    return result;
}

std::vector<std::string> greedy_decode(const ModelParameters& params, const Vocabulary& vocab,
                                       const std::vector<int>& input_ids, int max_out_len) {
    const Mat enc_out = encode_sequence(params, input_ids);
    std::vector<int> dec_ids = {Vocabulary::kPad};
    std::vector<std::string> tokens;
    for (int step = 0; step < max_out_len; ++step) {
        Mat logits = decoder_logits_cached(params, enc_out, dec_ids);
        Eigen::Index last = logits.rows() - 1;
        int best = 0;
        double best_v = logits(last, 0);
        for (int t = 1; t < static_cast<int>(vocab.size()); ++t) {
            if (logits(last, t) > best_v) {
                best_v = logits(last, t);
                best = t;
            }
        }
        if (best == Vocabulary::kEos) break;
        dec_ids.push_back(best);
        tokens.push_back(vocab.token_of(best));
    }
    return tokens;
}

}  // namespace revgen
