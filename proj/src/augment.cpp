#include "revgen/augment.hpp"

#include <algorithm>

#include "revgen/assets.hpp"
#include "revgen/errors.hpp"
#include "revgen/rng.hpp"
#include "revgen/textprep.hpp"

namespace revgen {

Thesaurus::Thesaurus(std::string_view tsv) {
    for (auto& row : assets::parse_tsv(tsv)) {
        if (row.size() < 2) continue;
        std::vector<std::string> syns(row.begin() + 1, row.end());
        entries_.emplace(std::move(row[0]), std::move(syns));
    }
}

const Thesaurus& Thesaurus::embedded() {
    static const Thesaurus t(assets::thesaurus_tsv());
    return t;
}

const std::vector<std::string>* Thesaurus::synonyms(std::string_view word) const {
    auto it = entries_.find(std::string(word));
    return it == entries_.end() ? nullptr : &it->second;
}

namespace {

size_t ops_to_apply(size_t len, double alpha) {
    return std::max<size_t>(1, static_cast<size_t>(alpha * static_cast<double>(len)));
}

void synonym_replace(std::vector<std::string>& tokens, size_t n_ops, Rng& rng,
                     const Thesaurus& thesaurus) {
    std::vector<size_t> candidates;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (thesaurus.synonyms(tokens[i])) candidates.push_back(i);
    }
    if (candidates.empty()) return;
    rng.shuffle(candidates);
    for (size_t k = 0; k < std::min(n_ops, candidates.size()); ++k) {
        const auto* syns = thesaurus.synonyms(tokens[candidates[k]]);
        tokens[candidates[k]] = (*syns)[rng.below(syns->size())];
    }
}

void random_insert(std::vector<std::string>& tokens, size_t n_ops, Rng& rng,
                   const Thesaurus& thesaurus) {
    for (size_t k = 0; k < n_ops; ++k) {
        // pick a word with synonyms, insert one of them at a random spot
        const std::vector<std::string>* syns = nullptr;
        for (int attempt = 0; attempt < 10 && !syns; ++attempt) {
            syns = thesaurus.synonyms(tokens[rng.below(tokens.size())]);
        }
        if (!syns) continue;
        const std::string& syn = (*syns)[rng.below(syns->size())];
        tokens.insert(tokens.begin() + static_cast<long>(rng.below(tokens.size() + 1)), syn);
    }
}

void random_swap(std::vector<std::string>& tokens, size_t n_ops, Rng& rng) {
    if (tokens.size() < 2) return;
    for (size_t k = 0; k < n_ops; ++k) {
        size_t i = rng.below(tokens.size());
        size_t j = rng.below(tokens.size());
        std::swap(tokens[i], tokens[j]);
    }
}

void random_delete(std::vector<std::string>& tokens, size_t n_ops, Rng& rng) {
    for (size_t k = 0; k < n_ops && tokens.size() > 1; ++k) {
        tokens.erase(tokens.begin() + static_cast<long>(rng.below(tokens.size())));
    }
}

}  // namespace

std::vector<std::string> eda_variant(const std::vector<std::string>& tokens, int variant_index,
                                     double alpha, uint64_t seed, const Thesaurus& thesaurus) {
    std::vector<std::string> out = tokens;
    if (tokens.empty()) return out;
    Rng rng(mix_seed(seed, static_cast<uint64_t>(variant_index)));
    size_t n_ops = ops_to_apply(tokens.size(), alpha);
    switch (static_cast<EdaOp>(variant_index % 4)) {
        case EdaOp::SynonymReplace:
            synonym_replace(out, n_ops, rng, thesaurus);
            break;
        case EdaOp::RandomInsert:
            random_insert(out, n_ops, rng, thesaurus);
            break;
        case EdaOp::RandomSwap:
            random_swap(out, n_ops, rng);
            break;
        case EdaOp::RandomDelete:
            random_delete(out, n_ops, rng);
            break;
    }
    return out;
}

AugmentResult eda_augment(const ReviewTriplet& triplet, const AugmentConfig& cfg,
                          const Thesaurus& thesaurus) {
    if (cfg.factor < 1) throw Error("augment factor must be >= 1");
    if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0) throw Error("augment alpha must be in (0,1)");

    AugmentResult result;
    result.records.push_back(triplet);

    std::vector<std::string> tokens = split_whitespace(triplet.comment);
    if (tokens.size() < 3) {
        result.too_short = true;
        return result;
    }

    uint64_t record_seed = cfg.seed ^ fnv1a64(triplet.id);
    for (int v = 0; v < cfg.factor - 1; ++v) {
        ReviewTriplet copy = triplet;
        copy.id = triplet.id + "~aug" + std::to_string(v + 1);
        copy.comment = detokenize(eda_variant(tokens, v, cfg.alpha, record_seed, thesaurus));
        result.records.push_back(std::move(copy));
    }
    return result;
}

}  // namespace revgen
