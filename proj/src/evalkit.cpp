#include "revgen/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "revgen/errors.hpp"

namespace revgen {

Rouge1 rouge_1(const TokenList& hyp, const TokenList& ref) {
    if (ref.empty()) throw EmptyReferenceError("rouge_1: empty reference");
    Rouge1 out;
    if (hyp.empty()) return out;

    std::unordered_map<std::string, size_t> ref_counts;
    for (const auto& t : ref) ++ref_counts[t];
    size_t overlap = 0;
    for (const auto& t : hyp) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    out.precision = static_cast<double>(overlap) / static_cast<double>(hyp.size());
    out.recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    if (out.precision + out.recall > 0.0) {
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    }
    return out;
}

namespace {

size_t lcs_length(const TokenList& a, const TokenList& b) {
    std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

double rouge_l(const TokenList& hyp, const TokenList& ref) {
    if (ref.empty()) throw EmptyReferenceError("rouge_l: empty reference");
    if (hyp.empty()) return 0.0;
    const double lcs = static_cast<double>(lcs_length(hyp, ref));
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(hyp.size());
    const double r = lcs / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

double perfect_prediction(const std::vector<TokenList>& hyps, const std::vector<TokenList>& refs) {
    if (hyps.size() != refs.size() || hyps.empty()) {
        throw LengthMismatchError("perfect_prediction: aligned non-empty lists required");
    }
    size_t hits = 0;
    for (size_t i = 0; i < hyps.size(); ++i) {
        if (hyps[i] == refs[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(hyps.size());
}

EvalReport evaluate_topk(const std::vector<std::vector<TokenList>>& candidates,
                         const std::vector<TokenList>& refs, int k) {
    if (candidates.size() != refs.size()) {
        throw LengthMismatchError("evaluate_topk: candidates/refs size mismatch");
    }
    EvalReport report;
    report.k = k;
    report.n_examples = refs.size();
    if (refs.empty()) return report;

    double sum_p = 0, sum_r = 0, sum_f = 0, sum_l = 0;
    size_t perfect = 0;
    for (size_t i = 0; i < refs.size(); ++i) {
        double best_p = 0, best_r = 0, best_f = 0, best_l = 0;
        bool hit = false;
        const auto& cands = candidates[i];
        for (size_t c = 0; c < cands.size() && c < static_cast<size_t>(k); ++c) {
            Rouge1 r1 = rouge_1(cands[c], refs[i]);
            best_p = std::max(best_p, r1.precision);
            best_r = std::max(best_r, r1.recall);
            best_f = std::max(best_f, r1.f1);
            best_l = std::max(best_l, rouge_l(cands[c], refs[i]));
            if (cands[c] == refs[i]) hit = true;
        }
        sum_p += best_p;
        sum_r += best_r;
        sum_f += best_f;
        sum_l += best_l;
        if (hit) ++perfect;
    }
    const double n = static_cast<double>(refs.size());
    report.rouge1_p = sum_p / n;
    report.rouge1_r = sum_r / n;
    report.rouge1_f = sum_f / n;
    report.rougeL = sum_l / n;
    report.perfect_prediction = static_cast<double>(perfect) / n;
    return report;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "k,rouge1_p,rouge1_r,rouge1_f,rougeL,perfect_prediction\n";
    char buf[160];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.k, r.rouge1_p,
                      r.rouge1_r, r.rouge1_f, r.rougeL, r.perfect_prediction);
        out << buf;
    }
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
    std::string out;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%4s %9s %9s %9s %9s %9s %8s\n", "k", "rouge1_p", "rouge1_r",
                  "rouge1_f", "rougeL", "perfect", "n");
    out += buf;
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%4d %9.4f %9.4f %9.4f %9.4f %9.4f %8zu\n", r.k,
                      r.rouge1_p, r.rouge1_r, r.rouge1_f, r.rougeL, r.perfect_prediction,
                      r.n_examples);
        out += buf;
    }
    return out;
}

}  // namespace revgen
