#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace revgen {

using TokenList = std::vector<std::string>;

struct Rouge1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Clipped unigram overlap. Throws EmptyReferenceError.
Rouge1 rouge_1(const TokenList& hyp, const TokenList& ref);

// LCS-based F-score with beta=1. Throws EmptyReferenceError.
double rouge_l(const TokenList& hyp, const TokenList& ref);

// Fraction of exact sequence matches. Throws LengthMismatchError.
double perfect_prediction(const std::vector<TokenList>& hyps, const std::vector<TokenList>& refs);

struct EvalReport {
    int k = 1;
    double rouge1_p = 0.0;
    double rouge1_r = 0.0;
    double rouge1_f = 0.0;
    double rougeL = 0.0;
    double perfect_prediction = 0.0;
    size_t n_examples = 0;
};

// Best-of-k: per example the max metric over the first k candidates, then
// macro-averaged. Perfect prediction counts an example if any of the first
// k candidates equals the reference.
EvalReport evaluate_topk(const std::vector<std::vector<TokenList>>& candidates,
                         const std::vector<TokenList>& refs, int k);

void write_report_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);
std::string format_report_table(const std::vector<EvalReport>& reports);

}  // namespace revgen
