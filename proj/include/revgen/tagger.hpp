#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "revgen/javalex.hpp"

namespace revgen {

enum class DiffOp { Keep, Delete, Insert };

struct DiffEntry {
    DiffOp op;
    int sub_line = -1;  // 1-based; -1 when not applicable
    int rev_line = -1;
    std::string text;
};

struct LineDiff {
    std::vector<DiffEntry> ops;
};

std::vector<std::string> split_lines(std::string_view text);

// Minimal line-level LCS edit script; ties prefer DELETE before INSERT.
LineDiff diff_lines(std::string_view sub_code, std::string_view rev_code);

// Applies the script; result must equal the revised lines.
std::vector<std::string> replay_diff(const LineDiff& diff);

// A maximal contiguous run of changed submitted-code lines (inclusive).
struct LineRun {
    int first = 0;
    int last = 0;
};

// Groups changed lines into runs, anchors pure insertions to the preceding
// kept line, clips each run to the innermost enclosing method, and drops
// runs that touch no method at all.
std::vector<LineRun> select_valid_modifications(const LineDiff& diff,
                                                const std::vector<MethodSpan>& methods);

struct TaggedFunction {
    std::string text;  // function lines with a tag line before each review line
    int start_line = 0;
    int end_line = 0;
    std::vector<int> tag_lines;  // sub_code coordinates
};

enum class ExtractError { None, NoEnclosingFunction, UnbalancedBraces };

struct ExtractResult {
    bool ok = false;
    TaggedFunction function;
    ExtractError error = ExtractError::None;
};

ExtractResult extract_function(std::string_view sub_code, LineRun run);
ExtractResult extract_function(std::string_view sub_code, LineRun run, const MethodScan& scan);

}  // namespace revgen
