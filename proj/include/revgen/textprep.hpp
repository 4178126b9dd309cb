#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace revgen {

// Sentinel marking a review line; kept atomic through tokenization.
inline constexpr std::string_view kReviewTagToken = "<review_tag>";

enum class TokenKind { Code, Comment };

struct TokenSequence {
    std::vector<std::string> tokens;
    TokenKind kind = TokenKind::Code;
};

struct StripResult {
    std::string text;
    bool unterminated_block = false;
};

// Remove // and /* */ comments from Java-like source. Newlines inside removed
// block comments are kept so line numbers stay stable. String and char
// literals are left intact even when they contain comment markers.
StripResult strip_source_comments(std::string_view code);

// Frequency-ranked lexicon backing the subword segmentation.
class Lexicon {
public:
    static const Lexicon& embedded();
    explicit Lexicon(const std::vector<std::string>& ranked_words);

    std::optional<size_t> rank(std::string_view word) const;
    size_t size() const { return size_; }
    size_t max_word_len() const { return max_word_len_; }

    // log(rank+1) * log(size); unknown words have no cost (not usable).
    std::optional<double> word_cost(std::string_view word) const;
    // Penalty for an unknown single character; exceeds any word cost.
    double unknown_char_cost() const;

private:
    struct Entry;
    std::vector<Entry> table_;
    size_t mask_ = 0;
    size_t size_ = 0;
    size_t max_word_len_ = 0;
};

// Camel/underscore split, then min-cost lexicon segmentation of each piece.
// Concatenating the output equals lowercase(word) minus separators.
std::vector<std::string> split_identifier(std::string_view word, const Lexicon& lexicon);

// Rule-based lemmatizer with an embedded irregular-forms table.
std::string lemmatize(std::string_view word);

struct NormalizeOptions {
    bool lemmatize_code = true;  // whether code tokens get lemmatized too
};

TokenSequence normalize_code(std::string_view code, const Lexicon& lexicon,
                             const NormalizeOptions& opts = {});

TokenSequence normalize_comment(std::string_view comment, const Lexicon& lexicon,
                                const NormalizeOptions& opts = {});

std::string detokenize(const std::vector<std::string>& tokens);

// Whitespace-insensitive form used as the dedup key.
std::string normalize_whitespace(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace revgen
