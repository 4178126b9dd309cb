#include "revgen/filter.hpp"

#include <algorithm>

namespace revgen {

std::string reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::TooShort: return "TOO_SHORT";
        case RejectReason::TooLong: return "TOO_LONG";
        case RejectReason::BeyondFunction: return "BEYOND_FUNCTION";
        case RejectReason::Empty: return "EMPTY";
    }
    return "UNKNOWN";
}

CodeAnalysis analyze_code_pair(const std::string& sub_code, const std::string& rev_code,
                               const Lexicon& lexicon) {
    CodeAnalysis analysis;
    const std::string sub_stripped = strip_source_comments(sub_code).text;
    const std::string rev_stripped = strip_source_comments(rev_code).text;

    const LineDiff diff = diff_lines(sub_stripped, rev_stripped);
    const MethodScan scan = scan_methods(sub_stripped);
    analysis.unbalanced = scan.unbalanced_braces;

    const std::vector<LineRun> runs = select_valid_modifications(diff, scan.methods);
    if (runs.empty()) {
        analysis.beyond_function = true;
        return analysis;
    }
    for (const LineRun& run : runs) {
        ExtractResult ex = extract_function(sub_stripped, run, scan);
        if (!ex.ok) continue;
        ExtractedPair pair;
        pair.token_count = normalize_code(ex.function.text, lexicon).tokens.size();
        pair.function = std::move(ex.function);
        analysis.pairs.push_back(std::move(pair));
    }
    if (analysis.pairs.empty()) analysis.beyond_function = true;
    return analysis;
}

FilterResult filter_triplets(const std::vector<ReviewTriplet>& corpus, const Lexicon& lexicon) {
    FilterResult result;
    for (const ReviewTriplet& t : corpus) {
        if (normalize_whitespace(t.sub_code).empty() || normalize_whitespace(t.rev_code).empty() ||
            normalize_whitespace(t.comment).empty()) {
            result.rejected.push_back({t, RejectReason::Empty});
            continue;
        }
        const size_t comment_len = normalize_comment(t.comment, lexicon).tokens.size();
        if (comment_len < kMinWords) {
            result.rejected.push_back({t, RejectReason::TooShort});
            continue;
        }
        if (comment_len > kMaxWords) {
            result.rejected.push_back({t, RejectReason::TooLong});
            continue;
        }
        CodeAnalysis analysis = analyze_code_pair(t.sub_code, t.rev_code, lexicon);
        if (analysis.beyond_function) {
            result.rejected.push_back({t, RejectReason::BeyondFunction});
            continue;
        }
        const bool any_eligible =
            std::any_of(analysis.pairs.begin(), analysis.pairs.end(), [](const ExtractedPair& p) {
                return p.token_count >= kMinWords && p.token_count <= kMaxWords;
            });
        if (!any_eligible) {
            const bool any_long =
                std::any_of(analysis.pairs.begin(), analysis.pairs.end(),
                            [](const ExtractedPair& p) { return p.token_count > kMaxWords; });
            result.rejected.push_back(
                {t, any_long ? RejectReason::TooLong : RejectReason::TooShort});
            continue;
        }
        result.kept.push_back(t);
    }
    return result;
}

}  // namespace revgen
