#include "revgen/javalex.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace revgen {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
           static_cast<unsigned char>(c) >= 128;
}

bool is_ident_part(char c) {
    return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

const std::unordered_set<std::string>& java_keywords() {
    static const std::unordered_set<std::string> kw = {
        "abstract", "assert",    "boolean",  "break",      "byte",       "case",
        "catch",    "char",      "class",    "const",      "continue",   "default",
        "do",       "double",    "else",     "enum",       "extends",    "final",
        "finally",  "float",     "for",      "goto",       "if",         "implements",
        "import",   "instanceof", "int",     "interface",  "long",       "native",
        "new",      "package",   "private",  "protected",  "public",     "return",
        "short",    "static",    "strictfp", "super",      "switch",     "synchronized",
        "this",     "throw",     "throws",   "transient",  "try",        "void",
        "volatile", "while"};
    return kw;
}

bool is_primitive_or_void(const std::string& s) {
    return s == "void" || s == "int" || s == "long" || s == "short" || s == "byte" ||
           s == "char" || s == "float" || s == "double" || s == "boolean";
}

bool is_modifier(const std::string& s) {
    return s == "public" || s == "private" || s == "protected" || s == "static" ||
           s == "final" || s == "abstract" || s == "synchronized" || s == "native" ||
           s == "strictfp" || s == "default" || s == "transient" || s == "volatile";
}

}  // namespace

std::vector<JavaToken> lex_java(std::string_view src) {
    std::vector<JavaToken> tokens;
    int line = 1;
    size_t i = 0;
    while (i < src.size()) {
        char c = src[i];
        char next = i + 1 < src.size() ? src[i + 1] : '\0';
        if (c == '\n') {
            ++line;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '/' && next == '/') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && next == '*') {
            i += 2;
            while (i < src.size()) {
                if (src[i] == '*' && i + 1 < src.size() && src[i + 1] == '/') {
                    i += 2;
                    break;
                }
                if (src[i] == '\n') ++line;
                ++i;
            }
            continue;
        }
        if (c == '"' || c == '\'') {
            char quote = c;
            int start_line = line;
            size_t start = i;
            ++i;
            while (i < src.size()) {
                if (src[i] == '\\' && i + 1 < src.size()) {
                    i += 2;
                    continue;
                }
                if (src[i] == quote) {
                    ++i;
                    break;
                }
                if (src[i] == '\n') {
                    ++line;  // unterminated literal; stop at line end
                    break;
                }
                ++i;
            }
            tokens.push_back({quote == '"' ? JavaToken::Kind::String : JavaToken::Kind::CharLit,
                              std::string(src.substr(start, i - start)), start_line});
            continue;
        }
        if (is_ident_start(c)) {
            size_t start = i;
            while (i < src.size() && is_ident_part(src[i])) ++i;
            std::string text(src.substr(start, i - start));
            JavaToken::Kind kind = java_keywords().count(text) ? JavaToken::Kind::Keyword
                                                               : JavaToken::Kind::Ident;
            tokens.push_back({kind, std::move(text), line});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = i;
            while (i < src.size() && (is_ident_part(src[i]) || src[i] == '.')) ++i;
            tokens.push_back({JavaToken::Kind::Number, std::string(src.substr(start, i - start)),
                              line});
            continue;
        }
        tokens.push_back({JavaToken::Kind::Punct, std::string(1, c), line});
        ++i;
    }
    return tokens;
}

namespace {

// True for tokens that may belong to the declaration prefix when walking back
// from the return type (modifiers, annotations, generics, qualified names).
bool is_decl_prefix_token(const JavaToken& t) {
    if (t.kind == JavaToken::Kind::Ident) return true;
    if (t.kind == JavaToken::Kind::Keyword) {
        return is_modifier(t.text) || is_primitive_or_void(t.text);
    }
    if (t.kind == JavaToken::Kind::Punct) {
        return t.text == "@" || t.text == "." || t.text == "," || t.text == "<" ||
               t.text == ">" || t.text == "[" || t.text == "]" || t.text == "?" ||
               t.text == "&";
    }
    return false;
}

bool is_typeish_end(const JavaToken& t) {
    if (t.kind == JavaToken::Kind::Ident) return true;
    if (t.kind == JavaToken::Kind::Keyword) return is_primitive_or_void(t.text);
    if (t.kind == JavaToken::Kind::Punct) return t.text == ">" || t.text == "]";
    return false;
}

}  // namespace

MethodScan scan_methods(std::string_view src) {
    MethodScan scan;
    const std::vector<JavaToken> toks = lex_java(src);
    const auto punct = [&](size_t i, const char* s) {
        return i < toks.size() && toks[i].kind == JavaToken::Kind::Punct && toks[i].text == s;
    };

    for (size_t i = 0; i + 1 < toks.size(); ++i) {
        if (toks[i].kind != JavaToken::Kind::Ident || !punct(i + 1, "(")) continue;
        if (i == 0 || !is_typeish_end(toks[i - 1])) continue;

        // match the parameter list
        size_t j = i + 1;
        int depth = 0;
        while (j < toks.size()) {
            if (punct(j, "(")) ++depth;
            if (punct(j, ")")) {
                --depth;
                if (depth == 0) break;
            }
            ++j;
        }
        if (j >= toks.size()) continue;

        // optional "throws A, B.C" then the body brace
        size_t k = j + 1;
        if (k < toks.size() && toks[k].kind == JavaToken::Kind::Keyword &&
            toks[k].text == "throws") {
            ++k;
            while (k < toks.size() &&
                   (toks[k].kind == JavaToken::Kind::Ident ||
                    (toks[k].kind == JavaToken::Kind::Punct &&
                     (toks[k].text == "," || toks[k].text == ".")))) {
                ++k;
            }
        }
        if (!punct(k, "{")) continue;

        // declaration start: walk back over type/modifiers/annotations
        size_t first = i - 1;
        while (first > 0 && is_decl_prefix_token(toks[first - 1])) --first;

        // body end by brace matching
        size_t b = k;
        int braces = 0;
        while (b < toks.size()) {
            if (punct(b, "{")) ++braces;
            if (punct(b, "}")) {
                --braces;
                if (braces == 0) break;
            }
            ++b;
        }
        if (b >= toks.size()) {
            scan.unbalanced_braces = true;
            continue;
        }

        MethodSpan span;
        span.name = toks[i].text;
        span.start_line = toks[first].line;
        span.sig_line = toks[i].line;
        span.end_line = toks[b].line;
        scan.methods.push_back(std::move(span));
    }
    std::sort(scan.methods.begin(), scan.methods.end(),
              [](const MethodSpan& a, const MethodSpan& b) {
                  return a.start_line < b.start_line ||
                         (a.start_line == b.start_line && a.end_line > b.end_line);
              });
    return scan;
}

}  // namespace revgen
