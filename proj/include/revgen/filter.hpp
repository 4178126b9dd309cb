#pragma once

#include <string>
#include <vector>

#include "revgen/corpus.hpp"
#include "revgen/tagger.hpp"
#include "revgen/textprep.hpp"

namespace revgen {

enum class RejectReason { TooShort, TooLong, BeyondFunction, Empty };

std::string reject_reason_name(RejectReason r);

struct RejectedTriplet {
    ReviewTriplet triplet;
    RejectReason reason;
};

struct FilterResult {
    std::vector<ReviewTriplet> kept;
    std::vector<RejectedTriplet> rejected;
};

// Length window, inclusive, for comments and tokenized tagged functions.
inline constexpr size_t kMinWords = 3;
inline constexpr size_t kMaxWords = 128;

// One extracted review pair: the tagged function plus its token count.
struct ExtractedPair {
    TaggedFunction function;
    size_t token_count = 0;
};

struct CodeAnalysis {
    std::vector<ExtractedPair> pairs;  // all extractable pairs, unfiltered
    bool beyond_function = false;      // diff touches no method body
    bool unbalanced = false;
};

// strip comments -> line diff -> valid runs -> function extraction.
CodeAnalysis analyze_code_pair(const std::string& sub_code, const std::string& rev_code,
                               const Lexicon& lexicon);

// Splits the corpus into kept triplets and rejections with reason codes.
FilterResult filter_triplets(const std::vector<ReviewTriplet>& corpus, const Lexicon& lexicon);

}  // namespace revgen
