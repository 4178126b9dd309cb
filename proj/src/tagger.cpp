#include "revgen/tagger.hpp"

#include <algorithm>
#include <cstdint>
#include <map>

#include "revgen/textprep.hpp"

namespace revgen {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

LineDiff diff_lines(std::string_view sub_code, std::string_view rev_code) {
    const std::vector<std::string> a = split_lines(sub_code);
    const std::vector<std::string> b = split_lines(rev_code);
    const size_t n = a.size(), m = b.size();

    std::vector<std::vector<uint32_t>> dp(n + 1, std::vector<uint32_t>(m + 1, 0));
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1]) {
                dp[i][j] = dp[i - 1][j - 1] + 1;
            } else {
                dp[i][j] = std::max(dp[i - 1][j], dp[i][j - 1]);
            }
        }
    }

    LineDiff diff;
    size_t i = n, j = m;
    std::vector<DiffEntry> rev_ops;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && a[i - 1] == b[j - 1] && dp[i][j] == dp[i - 1][j - 1] + 1) {
            rev_ops.push_back({DiffOp::Keep, static_cast<int>(i), static_cast<int>(j), a[i - 1]});
            --i;
            --j;
        } else if (j > 0 && (i == 0 || dp[i][j - 1] >= dp[i - 1][j])) {
            // insert consumed here so the forward script emits DELETE first
            rev_ops.push_back({DiffOp::Insert, -1, static_cast<int>(j), b[j - 1]});
            --j;
        } else {
            rev_ops.push_back({DiffOp::Delete, static_cast<int>(i), -1, a[i - 1]});
            --i;
        }
    }
    diff.ops.assign(rev_ops.rbegin(), rev_ops.rend());
    return diff;
}

std::vector<std::string> replay_diff(const LineDiff& diff) {
    std::vector<std::string> out;
    for (const auto& e : diff.ops) {
        if (e.op == DiffOp::Keep || e.op == DiffOp::Insert) out.push_back(e.text);
    }
    return out;
}

namespace {

// innermost method span containing the line, or nullptr
const MethodSpan* innermost_span(const std::vector<MethodSpan>& methods, int line) {
    const MethodSpan* best = nullptr;
    for (const auto& m : methods) {
        if (line < m.start_line || line > m.end_line) continue;
        if (!best || (m.end_line - m.start_line) < (best->end_line - best->start_line)) {
            best = &m;
        }
    }
    return best;
}

}  // namespace

std::vector<LineRun> select_valid_modifications(const LineDiff& diff,
                                                const std::vector<MethodSpan>& methods) {
    // mark changed sub lines; pure insertions anchor to the preceding KEEP
    bool has_sub_lines = false;
    for (const auto& e : diff.ops) {
        if (e.sub_line > 0) {
            has_sub_lines = true;
            break;
        }
    }
    std::vector<int> marked;
    int last_keep_sub = 0;
    for (const auto& e : diff.ops) {
        switch (e.op) {
            case DiffOp::Keep:
                last_keep_sub = e.sub_line;
                break;
            case DiffOp::Delete:
                marked.push_back(e.sub_line);
                break;
            case DiffOp::Insert:
                if (last_keep_sub > 0) {
                    marked.push_back(last_keep_sub);
                } else if (has_sub_lines) {
                    marked.push_back(1);  // insertion before any kept line
                }
                break;
        }
    }
    std::sort(marked.begin(), marked.end());
    marked.erase(std::unique(marked.begin(), marked.end()), marked.end());

    // group consecutive lines that share the same innermost method
    std::vector<LineRun> runs;
    for (size_t i = 0; i < marked.size();) {
        const MethodSpan* span = innermost_span(methods, marked[i]);
        if (!span) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < marked.size() && marked[j + 1] == marked[j] + 1 &&
               innermost_span(methods, marked[j + 1]) == span) {
            ++j;
        }
        runs.push_back({marked[i], marked[j]});
        i = j + 1;
    }
    return runs;
}

ExtractResult extract_function(std::string_view sub_code, LineRun run) {
    return extract_function(sub_code, run, scan_methods(sub_code));
}

ExtractResult extract_function(std::string_view sub_code, LineRun run, const MethodScan& scan) {
    ExtractResult result;
    const MethodSpan* span = innermost_span(scan.methods, run.first);
    if (!span) {
        result.error = scan.unbalanced_braces ? ExtractError::UnbalancedBraces
                                              : ExtractError::NoEnclosingFunction;
        return result;
    }

    const std::vector<std::string> lines = split_lines(sub_code);
    TaggedFunction fn;
    fn.start_line = span->start_line;
    fn.end_line = span->end_line;
    for (int line = std::max(run.first, span->start_line);
         line <= std::min(run.last, span->end_line); ++line) {
        fn.tag_lines.push_back(line);
    }
    if (fn.tag_lines.empty()) {
        result.error = ExtractError::NoEnclosingFunction;
        return result;
    }

    std::string text;
    for (int line = span->start_line; line <= span->end_line; ++line) {
        if (std::binary_search(fn.tag_lines.begin(), fn.tag_lines.end(), line)) {
            text += kReviewTagToken;
            text += '\n';
        }
        text += lines[static_cast<size_t>(line - 1)];
        if (line < span->end_line) text += '\n';
    }
    fn.text = std::move(text);
    result.ok = true;
    result.function = std::move(fn);
    return result;
}

}  // namespace revgen
