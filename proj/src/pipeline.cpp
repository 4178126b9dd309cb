#include "revgen/pipeline.hpp"

#include <algorithm>

#include "revgen/errors.hpp"

namespace revgen {

ojson pair_to_json(const TaggedPair& p) {
    ojson j;
    j["id"] = p.id;
    j["function_tagged"] = p.function_tagged;
    j["comment_prepared"] = p.comment_prepared;
    j["multi_run"] = p.multi_run;
    return j;
}

TaggedPair pair_from_json(const ojson& j) {
    TaggedPair p;
    try {
        p.id = j.at("id").get<std::string>();
        p.function_tagged = j.at("function_tagged").get<std::string>();
        p.comment_prepared = j.at("comment_prepared").get<std::string>();
        p.multi_run = j.value("multi_run", false);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad pair record: ") + e.what());
    }
    return p;
}

std::vector<TaggedPair> load_pairs(const std::filesystem::path& path) {
    std::vector<TaggedPair> out;
    for (const auto& j : read_jsonl(path)) out.push_back(pair_from_json(j));
    return out;
}

void save_pairs(const std::filesystem::path& path, const std::vector<TaggedPair>& pairs) {
    std::vector<ojson> records;
    records.reserve(pairs.size());
    for (const auto& p : pairs) records.push_back(pair_to_json(p));
    write_jsonl(path, records);
}

PrepareStats prepare_corpus(const std::filesystem::path& in_path,
                            const std::filesystem::path& out_path,
                            const std::filesystem::path& rejected_path, const Lexicon& lexicon) {
    PrepareStats stats;
    std::vector<ReviewTriplet> triplets = load_triplets(in_path);
    stats.input = triplets.size();

    DedupResult deduped = dedup(triplets);
    stats.duplicates_removed = deduped.removed;

    FilterResult filtered = filter_triplets(deduped.kept, lexicon);
    std::vector<ojson> kept_records;
    for (auto& t : filtered.kept) {
        ReviewTriplet prepared = t;
        prepared.comment = detokenize(normalize_comment(t.comment, lexicon).tokens);
        kept_records.push_back(triplet_to_json(prepared));
    }
    write_jsonl(out_path, kept_records);
    stats.kept = kept_records.size();

    std::vector<ojson> rejected_records;
    for (const auto& r : filtered.rejected) {
        ojson j = triplet_to_json(r.triplet);
        j["reason"] = reject_reason_name(r.reason);
        rejected_records.push_back(std::move(j));
        switch (r.reason) {
            case RejectReason::TooShort: ++stats.rejected_too_short; break;
            case RejectReason::TooLong: ++stats.rejected_too_long; break;
            case RejectReason::BeyondFunction: ++stats.rejected_beyond_function; break;
            case RejectReason::Empty: ++stats.rejected_empty; break;
        }
    }
    if (!rejected_path.empty()) write_jsonl(rejected_path, rejected_records);
    return stats;
}

std::vector<TaggedPair> tag_triplets(const std::vector<ReviewTriplet>& triplets,
                                     const Lexicon& lexicon, TagStats* stats) {
    std::vector<TaggedPair> pairs;
    TagStats local;
    for (const auto& t : triplets) {
        ++local.triplets;
        CodeAnalysis analysis = analyze_code_pair(t.sub_code, t.rev_code, lexicon);
        if (analysis.pairs.empty()) {
            ++local.skipped_no_function;
            continue;
        }
        std::vector<const ExtractedPair*> eligible;
        for (const auto& p : analysis.pairs) {
            if (p.token_count >= kMinWords && p.token_count <= kMaxWords) {
                eligible.push_back(&p);
            } else {
                ++local.skipped_length;
            }
        }
        for (size_t i = 0; i < eligible.size(); ++i) {
            TaggedPair pair;
            pair.id = eligible.size() > 1 ? t.id + "#r" + std::to_string(i) : t.id;
            pair.function_tagged = eligible[i]->function.text;
            pair.comment_prepared = t.comment;
            pair.multi_run = eligible.size() > 1;
            pairs.push_back(std::move(pair));
            ++local.pairs;
        }
    }
    if (stats) *stats = local;
    return pairs;
}

std::vector<std::string> function_tokens(const TaggedPair& pair, const Lexicon& lexicon,
                                         bool keep_tags) {
    std::vector<std::string> tokens = normalize_code(pair.function_tagged, lexicon).tokens;
    if (!keep_tags) {
        std::erase_if(tokens, [](const std::string& t) { return t == kReviewTagToken; });
    }
    return tokens;
}

Vocabulary build_vocab_from_pairs(const std::vector<TaggedPair>& pairs, const Lexicon& lexicon,
                                  size_t min_freq, size_t max_size) {
    std::vector<std::vector<std::string>> sequences;
    sequences.reserve(pairs.size() * 2);
    for (const auto& p : pairs) {
        sequences.push_back(function_tokens(p, lexicon, true));
        sequences.push_back(split_whitespace(p.comment_prepared));
    }
    // the task prefix must be encodable
    sequences.push_back(comment_prefix());
    sequences.push_back(comment_prefix());
    return Vocabulary::build(sequences, min_freq, max_size);
}

std::vector<TrainingExample> build_mlm_dataset(const std::vector<TaggedPair>& pairs,
                                               const Vocabulary& vocab, const Lexicon& lexicon,
                                               int max_in_len, double mask_rate, uint64_t seed,
                                               bool keep_tags) {
    std::vector<TrainingExample> dataset;
    for (size_t i = 0; i < pairs.size(); ++i) {
        std::vector<std::string> body = function_tokens(pairs[i], lexicon, keep_tags);
        for (auto& tok : split_whitespace(pairs[i].comment_prepared)) {
            body.push_back(std::move(tok));
        }
        std::vector<int> ids =
            encode(body, vocab, comment_prefix(), static_cast<size_t>(max_in_len));
        try {
            MaskResult masked =
                mask_tokens(ids, mask_rate, mix_seed(seed, i), comment_prefix().size());
            TrainingExample ex;
            ex.input_ids = std::move(masked.masked_ids);
            ex.target_ids = std::move(masked.original_ids);
            ex.mask_positions = std::move(masked.positions);
            dataset.push_back(std::move(ex));
        } catch (const NothingMaskableError&) {
            // nothing usable in this record
        }
    }
    return dataset;
}

std::vector<TrainingExample> build_seq2seq_dataset(const std::vector<TaggedPair>& pairs,
                                                   const Vocabulary& vocab,
                                                   const Lexicon& lexicon, int max_in_len,
                                                   int max_out_len, bool keep_tags) {
    std::vector<TrainingExample> dataset;
    for (const auto& p : pairs) {
        TrainingExample ex;
        ex.input_ids = encode(function_tokens(p, lexicon, keep_tags), vocab, comment_prefix(),
                              static_cast<size_t>(max_in_len));
        ex.target_ids = encode(split_whitespace(p.comment_prepared), vocab, {},
                               static_cast<size_t>(max_out_len));
        dataset.push_back(std::move(ex));
    }
    return dataset;
}

ApplyExtraction tag_file_range(const std::string& file_content, LineRun range) {
    ApplyExtraction out;
    if (range.first < 1 || range.last < range.first) {
        out.error = "invalid line range";
        return out;
    }
    StripResult stripped = strip_source_comments(file_content);
    ExtractResult ex = extract_function(stripped.text, range);
    if (!ex.ok) {
        out.error = ex.error == ExtractError::UnbalancedBraces
                        ? "unbalanced braces in file"
                        : "no enclosing function for the given lines";
        return out;
    }
    out.ok = true;
    out.function = std::move(ex.function);
    return out;
}

void ensure_vocab_matches(const ModelParameters& params, const Vocabulary& vocab) {
    if (params.vocab_size != vocab.size()) {
        throw VocabMismatchError("model vocabulary size " + std::to_string(params.vocab_size) +
                                 " != " + std::to_string(vocab.size()));
    }
}

}  // namespace revgen
