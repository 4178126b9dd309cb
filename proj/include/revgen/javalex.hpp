#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace revgen {

// Token stream for the lightweight Java scanner. Comments are skipped;
// string/char literals come through as single tokens.
struct JavaToken {
    enum class Kind { Ident, Keyword, Number, Punct, String, CharLit };
    Kind kind;
    std::string text;
    int line = 1;  // 1-based
};

std::vector<JavaToken> lex_java(std::string_view src);

// One method (or constructor-like) declaration span, 1-based line numbers.
struct MethodSpan {
    std::string name;
    int start_line = 0;  // first modifier/annotation/type line
    int sig_line = 0;    // line holding the method name
    int end_line = 0;    // closing brace of the body
};

struct MethodScan {
    std::vector<MethodSpan> methods;
    bool unbalanced_braces = false;
};

// Brace matching plus a "type ident ( params ) {" signature heuristic.
MethodScan scan_methods(std::string_view src);

}  // namespace revgen
