#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "revgen/augment.hpp"
#include "revgen/corpus.hpp"
#include "revgen/filter.hpp"
#include "revgen/model.hpp"
#include "revgen/tagger.hpp"
#include "revgen/textprep.hpp"
#include "revgen/vocab.hpp"

namespace revgen {

// One training pair: tagged function text plus the prepared comment.
struct TaggedPair {
    std::string id;
    std::string function_tagged;
    std::string comment_prepared;
    bool multi_run = false;
};

ojson pair_to_json(const TaggedPair& p);
TaggedPair pair_from_json(const ojson& j);
std::vector<TaggedPair> load_pairs(const std::filesystem::path& path);
void save_pairs(const std::filesystem::path& path, const std::vector<TaggedPair>& pairs);

struct PrepareStats {
    size_t input = 0;
    size_t duplicates_removed = 0;
    size_t kept = 0;
    size_t rejected_too_short = 0;
    size_t rejected_too_long = 0;
    size_t rejected_beyond_function = 0;
    size_t rejected_empty = 0;
};

// dedup + filter + comment normalization; writes kept and rejected JSONL.
PrepareStats prepare_corpus(const std::filesystem::path& in_path,
                            const std::filesystem::path& out_path,
                            const std::filesystem::path& rejected_path, const Lexicon& lexicon);

struct TagStats {
    size_t triplets = 0;
    size_t pairs = 0;
    size_t skipped_length = 0;
    size_t skipped_no_function = 0;
};

// Extracts one TaggedPair per valid run; pairs outside the token window are
// dropped.
std::vector<TaggedPair> tag_triplets(const std::vector<ReviewTriplet>& triplets,
                                     const Lexicon& lexicon, TagStats* stats = nullptr);

// Word-level vocabulary over tagged functions plus prepared comments.
Vocabulary build_vocab_from_pairs(const std::vector<TaggedPair>& pairs, const Lexicon& lexicon,
                                  size_t min_freq = 2, size_t max_size = 32000);

std::vector<std::string> function_tokens(const TaggedPair& pair, const Lexicon& lexicon,
                                         bool keep_tags);

// prefix + code (+ comment) in one masked sequence per example.
std::vector<TrainingExample> build_mlm_dataset(const std::vector<TaggedPair>& pairs,
                                               const Vocabulary& vocab, const Lexicon& lexicon,
                                               int max_in_len, double mask_rate, uint64_t seed,
                                               bool keep_tags = true);

// (prefix + tagged code) -> comment targets.
std::vector<TrainingExample> build_seq2seq_dataset(const std::vector<TaggedPair>& pairs,
                                                   const Vocabulary& vocab,
                                                   const Lexicon& lexicon, int max_in_len,
                                                   int max_out_len, bool keep_tags = true);

// Tags explicit line ranges in a source file (the apply mode).
struct ApplyExtraction {
    bool ok = false;
    TaggedFunction function;
    std::string error;
};
ApplyExtraction tag_file_range(const std::string& file_content, LineRun range);

void ensure_vocab_matches(const ModelParameters& params, const Vocabulary& vocab);

}  // namespace revgen
