#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "revgen/corpus.hpp"

namespace revgen {

struct AugmentConfig {
    int factor = 9;      // total copies per record, original included
    double alpha = 0.1;  // fraction of tokens touched per op
    uint64_t seed = 0;
};

class Thesaurus {
public:
    static const Thesaurus& embedded();
    explicit Thesaurus(std::string_view tsv);

    // nullptr when the word has no synonyms
    const std::vector<std::string>* synonyms(std::string_view word) const;
    size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, std::vector<std::string>> entries_;
};

enum class EdaOp { SynonymReplace, RandomInsert, RandomSwap, RandomDelete };

// One EDA variant of a token list; op chosen round-robin by variant index.
std::vector<std::string> eda_variant(const std::vector<std::string>& tokens, int variant_index,
                                     double alpha, uint64_t seed, const Thesaurus& thesaurus);

struct AugmentResult {
    std::vector<ReviewTriplet> records;
    bool too_short = false;  // comment below 3 tokens: original passed through
};

// factor records total: the original plus factor-1 comment variants.
// Code fields stay byte-identical. Deterministic under cfg.seed.
AugmentResult eda_augment(const ReviewTriplet& triplet, const AugmentConfig& cfg,
                          const Thesaurus& thesaurus);

}  // namespace revgen
