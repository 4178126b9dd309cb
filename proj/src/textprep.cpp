#include "revgen/textprep.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "revgen/assets.hpp"
#include "revgen/rng.hpp"

namespace revgen {

namespace {

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(char c) { return is_ascii_alpha(c) || is_ascii_digit(c) || c == '_' || c == '$'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
char to_lower(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lower_copy(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](char c) { return to_lower(c); });
    return out;
}

bool is_vowel(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

bool has_vowel(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return is_vowel(c); });
}

bool all_alpha_lower(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return is_lower(c); });
}

}  // namespace

// ---------------------------------------------------------------------------
// strip_source_comments
// ---------------------------------------------------------------------------

StripResult strip_source_comments(std::string_view code) {
    enum class State { Normal, LineComment, BlockComment, String, Char };
    StripResult result;
    result.text.reserve(code.size());
    State state = State::Normal;
    size_t i = 0;
    while (i < code.size()) {
        char c = code[i];
        char next = i + 1 < code.size() ? code[i + 1] : '\0';
        switch (state) {
            case State::Normal:
                if (c == '/' && next == '/') {
                    state = State::LineComment;
                    i += 2;
                } else if (c == '/' && next == '*') {
                    state = State::BlockComment;
                    i += 2;
                } else if (c == '"') {
                    state = State::String;
                    result.text += c;
                    ++i;
                } else if (c == '\'') {
                    state = State::Char;
                    result.text += c;
                    ++i;
                } else {
                    result.text += c;
                    ++i;
                }
                break;
            case State::LineComment:
                if (c == '\n') {
                    state = State::Normal;
                    result.text += c;
                }
                ++i;
                break;
            case State::BlockComment:
                if (c == '*' && next == '/') {
                    state = State::Normal;
                    i += 2;
                } else {
                    if (c == '\n') result.text += c;  // keep line numbering stable
                    ++i;
                }
                break;
            case State::String:
                if (c == '\\' && i + 1 < code.size()) {
                    result.text += c;
                    result.text += next;
                    i += 2;
                } else {
                    if (c == '"' || c == '\n') state = State::Normal;
                    result.text += c;
                    ++i;
                }
                break;
            case State::Char:
                if (c == '\\' && i + 1 < code.size()) {
                    result.text += c;
                    result.text += next;
                    i += 2;
                } else {
                    if (c == '\'' || c == '\n') state = State::Normal;
                    result.text += c;
                    ++i;
                }
                break;
        }
    }
    result.unterminated_block = (state == State::BlockComment);
    return result;
}

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

struct Lexicon::Entry {
    std::string word;
    size_t rank = 0;
};

Lexicon::Lexicon(const std::vector<std::string>& ranked_words) {
    size_ = ranked_words.size();
    size_t cap = 16;
    while (cap < size_ * 2) cap <<= 1;
    mask_ = cap - 1;
    table_.resize(cap);
    for (size_t r = 0; r < ranked_words.size(); ++r) {
        const std::string& w = ranked_words[r];
        max_word_len_ = std::max(max_word_len_, w.size());
        size_t slot = fnv1a64(w) & mask_;
        while (!table_[slot].word.empty()) {
            if (table_[slot].word == w) break;  // first (best) rank wins
            slot = (slot + 1) & mask_;
        }
        if (table_[slot].word.empty()) {
            table_[slot].word = w;
            table_[slot].rank = r;
        }
    }
}

const Lexicon& Lexicon::embedded() {
    static const Lexicon lex(assets::wordlist());
    return lex;
}

std::optional<size_t> Lexicon::rank(std::string_view word) const {
    if (word.empty() || table_.empty()) return std::nullopt;
    size_t slot = fnv1a64(word) & mask_;
    while (!table_[slot].word.empty()) {
        if (table_[slot].word == word) return table_[slot].rank;
        slot = (slot + 1) & mask_;
    }
    return std::nullopt;
}

std::optional<double> Lexicon::word_cost(std::string_view word) const {
    auto r = rank(word);
    if (!r) return std::nullopt;
    return std::log(static_cast<double>(*r) + 1.0) * std::log(static_cast<double>(size_));
}

double Lexicon::unknown_char_cost() const {
    double logn = std::log(static_cast<double>(size_));
    return 2.0 * std::log(static_cast<double>(size_) + 1.0) * logn;
}

// ---------------------------------------------------------------------------
// split_identifier
// ---------------------------------------------------------------------------

namespace {

// camelCase / underscore / letter-digit boundaries
std::vector<std::string> coarse_split(std::string_view word) {
    std::vector<std::string> pieces;
    std::string cur;
    char prev_raw = '\0';
    auto flush = [&] {
        if (!cur.empty()) {
            pieces.push_back(cur);
            cur.clear();
        }
    };
    for (size_t i = 0; i < word.size(); ++i) {
        char c = word[i];
        if (!is_ascii_alpha(c) && !is_ascii_digit(c)) {
            flush();  // separator (_, $, anything else)
            prev_raw = '\0';
            continue;
        }
        if (!cur.empty()) {
            bool boundary = false;
            if (is_lower(prev_raw) && is_upper(c)) boundary = true;              // fooBar
            if (is_ascii_alpha(prev_raw) != is_ascii_alpha(c)) boundary = true;  // utf8
            // HTTPServer -> HTTP | Server
            if (is_upper(prev_raw) && is_upper(c) && i + 1 < word.size() &&
                is_lower(word[i + 1]))
                boundary = true;
            if (boundary) flush();
        }
        cur += to_lower(c);
        prev_raw = c;
    }
    flush();
    return pieces;
}

// Minimum-cost segmentation over the lexicon via dynamic programming.
std::vector<std::string> dp_segment(std::string_view piece, const Lexicon& lex) {
    const size_t n = piece.size();
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> best(n + 1, kInf);
    std::vector<size_t> prev(n + 1, 0);
    best[0] = 0.0;
    const size_t max_len = std::min(lex.max_word_len(), n);
    for (size_t i = 1; i <= n; ++i) {
        size_t j_lo = i > max_len ? i - max_len : 0;
        for (size_t j = j_lo; j < i; ++j) {
            if (best[j] == kInf) continue;
            std::string_view w = piece.substr(j, i - j);
            std::optional<double> c = lex.word_cost(w);
            double cost;
            if (c) {
                cost = *c;
            } else if (i - j == 1) {
                cost = lex.unknown_char_cost();
            } else {
                continue;
            }
            if (best[j] + cost < best[i]) {
                best[i] = best[j] + cost;
                prev[i] = j;
            }
        }
    }
    std::vector<std::string> out;
    size_t i = n;
    while (i > 0) {
        size_t j = prev[i];
        out.emplace_back(piece.substr(j, i - j));
        i = j;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<std::string> split_identifier(std::string_view word, const Lexicon& lexicon) {
    std::vector<std::string> out;
    for (const std::string& piece : coarse_split(word)) {
        if (is_ascii_digit(piece[0])) {
            out.push_back(piece);
            continue;
        }
        for (auto& sub : dp_segment(piece, lexicon)) {
            out.push_back(std::move(sub));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// lemmatize
// ---------------------------------------------------------------------------

namespace {

const std::unordered_map<std::string, std::string>& lemma_exceptions() {
    static const std::unordered_map<std::string, std::string> table = [] {
        std::unordered_map<std::string, std::string> t;
        for (const auto& row : assets::parse_tsv(assets::lemma_exceptions_tsv())) {
            if (row.size() >= 2) t[row[0]] = row[1];
        }
        return t;
    }();
    return table;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// After stripping -ed/-ing: undo consonant doubling, restore a dropped 'e'.
std::string fix_stem(std::string stem, const Lexicon& lex) {
    static const std::array<std::string_view, 8> doubles = {"bb", "dd", "gg", "mm",
                                                            "nn", "pp", "rr", "tt"};
    for (auto d : doubles) {
        if (ends_with(stem, d)) {
            stem.pop_back();
            return stem;
        }
    }
    if (lex.rank(stem)) return stem;
    std::string with_e = stem + "e";
    if (lex.rank(with_e)) return with_e;
    // CVC heuristic as a fallback for stems the lexicon does not know
    size_t n = stem.size();
    if (n >= 2) {
        char last = stem[n - 1];
        char prior = stem[n - 2];
        bool cvc = !is_vowel(last) && last != 'w' && last != 'x' && last != 'y' &&
                   is_vowel(prior) && (n == 2 || !is_vowel(stem[n - 3]));
        if (cvc) return with_e;
    }
    return stem;
}

}  // namespace

std::string lemmatize(std::string_view word) {
    std::string w = lower_copy(word);
    const auto& exc = lemma_exceptions();
    if (auto it = exc.find(w); it != exc.end()) return it->second;
    if (!all_alpha_lower(w)) return w;
    const Lexicon& lex = Lexicon::embedded();

    if (w.size() >= 5 && ends_with(w, "ies")) {
        return w.substr(0, w.size() - 3) + "y";
    }
    if (w.size() >= 5 && ends_with(w, "ied")) {
        return w.substr(0, w.size() - 3) + "y";
    }
    for (std::string_view suf : {"sses", "xes", "zzes", "ches", "shes", "oes"}) {
        if (w.size() > suf.size() + 1 && ends_with(w, suf)) {
            return w.substr(0, w.size() - 2);
        }
    }
    if (ends_with(w, "eed")) {
        if (w.size() >= 6) return w.substr(0, w.size() - 1);
        return w;
    }
    if (w.size() >= 4 && ends_with(w, "ed")) {
        return fix_stem(w.substr(0, w.size() - 2), lex);
    }
    if (w.size() >= 5 && ends_with(w, "ing")) {
        std::string stem = w.substr(0, w.size() - 3);
        if (!has_vowel(stem)) return w;
        return fix_stem(std::move(stem), lex);
    }
    if (w.size() >= 4 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
        !ends_with(w, "is") && !ends_with(w, "os")) {
        return w.substr(0, w.size() - 1);
    }
    return w;
}

// ---------------------------------------------------------------------------
// normalize_code
// ---------------------------------------------------------------------------

TokenSequence normalize_code(std::string_view code, const Lexicon& lexicon,
                             const NormalizeOptions& opts) {
    TokenSequence seq;
    seq.kind = TokenKind::Code;
    size_t i = 0;
    while (i < code.size()) {
        char c = code[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (code.compare(i, kReviewTagToken.size(), kReviewTagToken) == 0) {
            seq.tokens.emplace_back(kReviewTagToken);
            i += kReviewTagToken.size();
            continue;
        }
        if (is_ascii_alpha(c) || c == '_' || c == '$') {
            size_t start = i;
            while (i < code.size() && is_ident_char(code[i])) ++i;
            for (auto& tok : split_identifier(code.substr(start, i - start), lexicon)) {
                if (opts.lemmatize_code && all_alpha_lower(tok)) {
                    seq.tokens.push_back(lemmatize(tok));
                } else {
                    seq.tokens.push_back(std::move(tok));
                }
            }
            continue;
        }
        if (is_ascii_digit(c)) {
            size_t start = i;
            while (i < code.size() &&
                   (is_ascii_digit(code[i]) || is_ascii_alpha(code[i]) || code[i] == '_')) {
                ++i;
            }
            seq.tokens.push_back(lower_copy(code.substr(start, i - start)));
            continue;
        }
        // punctuation: standalone token, except '.' which is dropped
        if (c != '.') {
            seq.tokens.emplace_back(1, c);
        }
        ++i;
    }
    return seq;
}

// ---------------------------------------------------------------------------
// normalize_comment
// ---------------------------------------------------------------------------

namespace {

const std::unordered_map<std::string, std::string>& contractions() {
    static const std::unordered_map<std::string, std::string> table = [] {
        std::unordered_map<std::string, std::string> t;
        for (const auto& row : assets::parse_tsv(assets::contractions_tsv())) {
            if (row.size() >= 2) t[row[0]] = row[1];
        }
        return t;
    }();
    return table;
}

// first `limit` sentences; boundary = . ! ? followed by whitespace or end
std::string first_sentences(std::string_view text, int limit) {
    int count = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            bool at_end = i + 1 >= text.size();
            if (at_end || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
                ++count;
                if (count >= limit) return std::string(text.substr(0, i + 1));
            }
        }
    }
    return std::string(text);
}

struct CommentPart {
    std::string text;
    bool is_code = false;
};

// Split on backtick-delimited code fragments (single or triple backticks).
std::vector<CommentPart> split_backticks(std::string_view text) {
    std::vector<CommentPart> parts;
    std::string cur;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '`') {
            size_t fence = 1;
            while (i + fence < text.size() && text[i + fence] == '`') ++fence;
            size_t close = text.find(std::string(fence, '`'), i + fence);
            if (close != std::string_view::npos) {
                if (!cur.empty()) parts.push_back({cur, false});
                cur.clear();
                parts.push_back({std::string(text.substr(i + fence, close - i - fence)), true});
                i = close + fence;
                continue;
            }
        }
        cur += text[i];
        ++i;
    }
    if (!cur.empty()) parts.push_back({cur, false});
    return parts;
}

// expand contractions and acronyms word by word
std::string expand_contractions(std::string_view text) {
    std::string out;
    size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            out += text[i];
            ++i;
            continue;
        }
        size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::string_view word = text.substr(start, i - start);
        // peel leading/trailing punctuation so "isn't?" still matches
        size_t a = 0, b = word.size();
        while (a < b && !is_ascii_alpha(word[a]) && !is_ascii_digit(word[a])) ++a;
        while (b > a && !is_ascii_alpha(word[b - 1]) && !is_ascii_digit(word[b - 1])) --b;
        std::string core = lower_copy(word.substr(a, b - a));
        const auto& table = contractions();
        if (auto it = table.find(core); it != table.end()) {
            out.append(word.substr(0, a));
            out.append(it->second);
            out.append(word.substr(b));
        } else {
            out.append(word);
        }
    }
    return out;
}

void tokenize_text_part(std::string_view text, std::vector<std::string>& out) {
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (is_ascii_alpha(c) || is_ascii_digit(c)) {
            size_t start = i;
            while (i < text.size() && (is_ascii_alpha(text[i]) || is_ascii_digit(text[i]))) ++i;
            std::string word = lower_copy(text.substr(start, i - start));
            out.push_back(all_alpha_lower(word) ? lemmatize(word) : word);
            continue;
        }
        if (c == '@') {
            // drop the whole mention
            ++i;
            while (i < text.size() && is_ident_char(text[i])) ++i;
            continue;
        }
        if (c == '\'' && i + 1 < text.size() && (text[i + 1] == 's' || text[i + 1] == 'S') &&
            (i + 2 >= text.size() || !is_ident_char(text[i + 2]))) {
            i += 2;  // possessive 's
            continue;
        }
        ++i;  // every other punctuation mark is removed
    }
}

}  // namespace

TokenSequence normalize_comment(std::string_view comment, const Lexicon& lexicon,
                                const NormalizeOptions& opts) {
    TokenSequence seq;
    seq.kind = TokenKind::Comment;
    std::string limited = first_sentences(comment, 3);
    for (const CommentPart& part : split_backticks(limited)) {
        if (part.is_code) {
            TokenSequence code = normalize_code(part.text, lexicon, opts);
            for (auto& t : code.tokens) seq.tokens.push_back(std::move(t));
        } else {
            std::string expanded = expand_contractions(part.text);
            tokenize_text_part(expanded, seq.tokens);
        }
    }
    return seq;
}

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    bool in_space = true;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out += ' ';
            in_space = false;
            out += c;
        }
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

}  // namespace revgen
