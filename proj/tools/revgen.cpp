// revgen: mine review triplets, prepare and tag them, train a small
// encoder-decoder generator, and score its review comments.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "revgen/augment.hpp"
#include "revgen/corpus.hpp"
#include "revgen/decode.hpp"
#include "revgen/errors.hpp"
#include "revgen/evalkit.hpp"
#include "revgen/fetch.hpp"
#include "revgen/filter.hpp"
#include "revgen/model.hpp"
#include "revgen/pipeline.hpp"
#include "revgen/textprep.hpp"
#include "revgen/vocab.hpp"

namespace fs = std::filesystem;
using namespace revgen;

namespace {

constexpr const char* kSchemaVersion = "revgen config schema 1";

struct TrainFlags {
    ModelConfig config;
    int steps = 0;
    int eval_every = 0;
    uint64_t seed = 0;
    double mask_rate = 0.10;
    bool no_review_tag = false;
    size_t vocab_min_freq = 2;
    size_t vocab_max_size = 32000;
};

void add_model_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--d-model", f.config.d_model, "embedding width");
    cmd->add_option("--enc-layers", f.config.n_layers_enc, "encoder layers");
    cmd->add_option("--dec-layers", f.config.n_layers_dec, "decoder layers");
    cmd->add_option("--heads", f.config.n_heads, "attention heads");
    cmd->add_option("--d-ff", f.config.d_ff, "feed-forward width");
    cmd->add_option("--dropout", f.config.dropout, "dropout probability");
    cmd->add_option("--max-in-len", f.config.max_in_len, "max input length");
    cmd->add_option("--max-out-len", f.config.max_out_len, "max output length");
    cmd->add_flag("--tie-output", f.config.tie_output, "tie output projection to embedding");
    cmd->add_option("--vocab-min-freq", f.vocab_min_freq, "vocabulary frequency floor");
    cmd->add_option("--vocab-max-size", f.vocab_max_size, "vocabulary size cap");
    cmd->add_option("--seed", f.seed, "random seed");
}

std::vector<LineRun> parse_ranges(const std::string& spec) {
    std::vector<LineRun> runs;
    size_t start = 0;
    while (start < spec.size()) {
        size_t comma = spec.find(',', start);
        if (comma == std::string::npos) comma = spec.size();
        std::string part = spec.substr(start, comma - start);
        size_t colon = part.find(':');
        LineRun run;
        if (colon == std::string::npos) {
            run.first = run.last = std::stoi(part);
        } else {
            run.first = std::stoi(part.substr(0, colon));
            run.last = std::stoi(part.substr(colon + 1));
        }
        runs.push_back(run);
        start = comma + 1;
    }
    return runs;
}

// JSONL records may be triplets or tagged pairs; augment the comment field.
int run_augment(const fs::path& in, const fs::path& out, int factor, double alpha,
                uint64_t seed) {
    const Thesaurus& thesaurus = Thesaurus::embedded();
    std::vector<ojson> records = read_jsonl(in);
    std::vector<ojson> augmented;
    size_t too_short = 0;
    for (const auto& rec : records) {
        const bool is_pair = rec.contains("comment_prepared");
        const std::string key = is_pair ? "comment_prepared" : "comment";
        if (is_pair) {
            TaggedPair pair = pair_from_json(rec);
            std::vector<std::string> tokens = split_whitespace(pair.comment_prepared);
            if (tokens.size() < 3) {
                ++too_short;
                augmented.push_back(rec);
                continue;
            }
            augmented.push_back(rec);
            uint64_t record_seed = seed ^ fnv1a64(pair.id);
            for (int v = 0; v < factor - 1; ++v) {
                ojson copy = rec;
                copy["id"] = pair.id + "~aug" + std::to_string(v + 1);
                copy[key] =
                    detokenize(eda_variant(tokens, v, alpha, record_seed, thesaurus));
                augmented.push_back(std::move(copy));
            }
        } else {
            AugmentConfig cfg;
            cfg.factor = factor;
            cfg.alpha = alpha;
            cfg.seed = seed;
            AugmentResult r = eda_augment(triplet_from_json(rec), cfg, thesaurus);
            if (r.too_short) ++too_short;
            for (const auto& t : r.records) augmented.push_back(triplet_to_json(t));
        }
    }
    write_jsonl(out, augmented);
    std::cerr << "augment: " << records.size() << " records -> " << augmented.size() << " ("
              << too_short << " too short to augment)\n";
    return 0;
}

struct LoadedDatasets {
    Vocabulary vocab;
    std::vector<TrainingExample> train;
    std::vector<TrainingExample> valid;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"review comment generation pipeline"};
    app.set_config("--config", "", "key=value config file; flags override it");
    app.require_subcommand(0, 1);

    bool show_version = false;
    app.add_flag("--version", show_version, "print the config schema version");

    // ---- fetch ----
    auto* fetch_cmd = app.add_subcommand("fetch", "mine review triplets over GraphQL");
    std::string fetch_repo, fetch_token, fetch_endpoint = "https://api.github.com/graphql";
    std::string fetch_out = "raw.jsonl", fetch_ckpt = "fetch_cursor.txt";
    int fetch_max_prs = 1000, fetch_page = 50;
    fetch_cmd->add_option("--repo", fetch_repo, "owner/name")->required();
    fetch_cmd->add_option("--token", fetch_token, "API token")->required();
    fetch_cmd->add_option("--endpoint", fetch_endpoint, "GraphQL endpoint");
    fetch_cmd->add_option("--max-prs", fetch_max_prs, "pull request budget");
    fetch_cmd->add_option("--page-size", fetch_page, "pull requests per page");
    fetch_cmd->add_option("--out", fetch_out, "output JSONL");
    fetch_cmd->add_option("--checkpoint", fetch_ckpt, "cursor checkpoint file");

    // ---- prepare ----
    auto* prep_cmd = app.add_subcommand("prepare", "dedup, filter, and normalize triplets");
    std::string prep_in, prep_out = "prepared.jsonl", prep_rej = "rejected.jsonl";
    prep_cmd->add_option("--in", prep_in, "raw triplets JSONL")->required();
    prep_cmd->add_option("--out", prep_out, "prepared output");
    prep_cmd->add_option("--rejected", prep_rej, "rejected records with reasons");

    // ---- tag ----
    auto* tag_cmd = app.add_subcommand("tag", "diff, tag review lines, extract functions");
    std::string tag_in, tag_out = "pairs.jsonl";
    tag_cmd->add_option("--in", tag_in, "prepared triplets JSONL")->required();
    tag_cmd->add_option("--out", tag_out, "tagged pairs output");

    // ---- augment ----
    auto* aug_cmd = app.add_subcommand("augment", "EDA-boost review comments");
    std::string aug_in, aug_out = "augmented.jsonl";
    int aug_factor = 9;
    double aug_alpha = 0.1;
    uint64_t aug_seed = 0;
    aug_cmd->add_option("--in", aug_in, "triplets or pairs JSONL")->required();
    aug_cmd->add_option("--out", aug_out, "augmented output");
    aug_cmd->add_option("--factor", aug_factor, "total copies per record");
    aug_cmd->add_option("--alpha", aug_alpha, "fraction of tokens touched");
    aug_cmd->add_option("--seed", aug_seed, "random seed");

    // ---- split ----
    auto* split_cmd = app.add_subcommand("split", "80/10/10 split of a JSONL file");
    std::string split_in, split_dir = ".";
    uint64_t split_seed = 0;
    split_cmd->add_option("--in", split_in, "input JSONL")->required();
    split_cmd->add_option("--out-dir", split_dir, "directory for train/valid/test.jsonl");
    split_cmd->add_option("--seed", split_seed, "shuffle seed");

    // ---- pretrain ----
    auto* pre_cmd = app.add_subcommand("pretrain", "masked-token pre-training");
    std::string pre_train, pre_valid, pre_dir = ".";
    TrainFlags pre_flags;
    pre_flags.config.max_in_len = 256;
    pre_flags.steps = 2000;
    pre_flags.eval_every = 200;
    pre_cmd->add_option("--train", pre_train, "train pairs JSONL")->required();
    pre_cmd->add_option("--valid", pre_valid, "validation pairs JSONL");
    pre_cmd->add_option("--out-dir", pre_dir, "output directory");
    pre_cmd->add_option("--steps", pre_flags.steps, "training steps");
    pre_cmd->add_option("--eval-every", pre_flags.eval_every, "validation interval");
    pre_cmd->add_option("--lr", pre_flags.config.lr_pretrain, "learning rate");
    pre_cmd->add_option("--batch", pre_flags.config.batch_pretrain, "batch size");
    pre_cmd->add_option("--mask-rate", pre_flags.mask_rate, "fraction of tokens masked");
    pre_cmd->add_flag("--no-review-tag", pre_flags.no_review_tag, "strip review tags");
    add_model_flags(pre_cmd, pre_flags);

    // ---- finetune ----
    auto* fin_cmd = app.add_subcommand("finetune", "train the comment generator");
    std::string fin_train, fin_valid, fin_dir = ".", fin_init, fin_resume;
    bool fin_no_pretrain = false;
    TrainFlags fin_flags;
    fin_flags.steps = 3000;
    fin_flags.eval_every = 200;
    fin_cmd->add_option("--train", fin_train, "train pairs JSONL")->required();
    fin_cmd->add_option("--valid", fin_valid, "validation pairs JSONL");
    fin_cmd->add_option("--out-dir", fin_dir, "output directory");
    fin_cmd->add_option("--init", fin_init, "pre-trained checkpoint to start from");
    fin_cmd->add_option("--resume", fin_resume, "checkpoint to continue training");
    fin_cmd->add_flag("--no-pretrain", fin_no_pretrain, "train from scratch");
    fin_cmd->add_flag("--no-review-tag", fin_flags.no_review_tag, "strip review tags");
    fin_cmd->add_option("--steps", fin_flags.steps, "training steps");
    fin_cmd->add_option("--eval-every", fin_flags.eval_every, "validation interval");
    fin_cmd->add_option("--lr", fin_flags.config.lr_finetune, "learning rate");
    fin_cmd->add_option("--batch", fin_flags.config.batch_finetune, "batch size");
    add_model_flags(fin_cmd, fin_flags);

    // ---- generate ----
    auto* gen_cmd = app.add_subcommand("generate", "beam-search top-k comments");
    std::string gen_ckpt, gen_in, gen_out = "generations.jsonl";
    int gen_k = 10, gen_beam = 0, gen_max_out = 0;
    bool gen_no_tag = false;
    gen_cmd->add_option("--ckpt", gen_ckpt, "model checkpoint")->required();
    gen_cmd->add_option("--in", gen_in, "pairs JSONL to generate for")->required();
    gen_cmd->add_option("--out", gen_out, "candidates JSONL");
    gen_cmd->add_option("--top-k", gen_k, "candidates per input");
    gen_cmd->add_option("--beam", gen_beam, "beam width override");
    gen_cmd->add_option("--max-out-len", gen_max_out, "generation length cap");
    gen_cmd->add_flag("--no-review-tag", gen_no_tag, "strip review tags from inputs");

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "score candidates with ROUGE and PP");
    std::string eval_gens, eval_refs, eval_csv = "report.csv", eval_ks = "1,3,6,10";
    eval_cmd->add_option("--gens", eval_gens, "candidates JSONL")->required();
    eval_cmd->add_option("--refs", eval_refs, "reference pairs JSONL")->required();
    eval_cmd->add_option("--csv", eval_csv, "CSV report path");
    eval_cmd->add_option("--ks", eval_ks, "comma-separated k values");

    // ---- apply ----
    auto* apply_cmd = app.add_subcommand("apply", "review chosen lines of a source file");
    std::string apply_file, apply_lines, apply_ckpt;
    int apply_k = 3;
    apply_cmd->add_option("--file", apply_file, "Java source file")->required();
    apply_cmd->add_option("--lines", apply_lines, "line ranges A:B[,C:D]")->required();
    apply_cmd->add_option("--ckpt", apply_ckpt, "model checkpoint")->required();
    apply_cmd->add_option("--top-k", apply_k, "comments per range");

    CLI11_PARSE(app, argc, argv);

    if (show_version) {
        std::cout << kSchemaVersion << "\n";
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help() << "\n";
        return 1;
    }

    const Lexicon& lexicon = Lexicon::embedded();
    try {
        if (fetch_cmd->parsed()) {
            std::vector<ojson> records;
            FetchOptions opts;
            opts.repo = fetch_repo;
            opts.auth_token = fetch_token;
            opts.endpoint = fetch_endpoint;
            opts.max_prs = fetch_max_prs;
            opts.page_size = fetch_page;
            opts.checkpoint_path = fetch_ckpt;
            FetchStats stats = fetch_reviews(
                opts, [&](const ReviewTriplet& t) { records.push_back(triplet_to_json(t)); },
                default_transport());
            write_jsonl(fetch_out, records);
            std::cerr << "fetch: " << stats.prs << " PRs, " << stats.triplets << " triplets, "
                      << stats.skipped_non_java << " non-java skipped, " << stats.schema_errors
                      << " schema errors\n";
        } else if (prep_cmd->parsed()) {
            PrepareStats stats = prepare_corpus(prep_in, prep_out, prep_rej, lexicon);
            std::cerr << "prepare: " << stats.input << " in, " << stats.duplicates_removed
                      << " duplicates, " << stats.kept << " kept (rejected: too_short "
                      << stats.rejected_too_short << ", too_long " << stats.rejected_too_long
                      << ", beyond_function " << stats.rejected_beyond_function << ", empty "
                      << stats.rejected_empty << ")\n";
        } else if (tag_cmd->parsed()) {
            TagStats stats;
            std::vector<TaggedPair> pairs = tag_triplets(load_triplets(tag_in), lexicon, &stats);
            save_pairs(tag_out, pairs);
            std::cerr << "tag: " << stats.triplets << " triplets -> " << stats.pairs
                      << " pairs (" << stats.skipped_length << " outside the length window, "
                      << stats.skipped_no_function << " without a function)\n";
        } else if (aug_cmd->parsed()) {
            return run_augment(aug_in, aug_out, aug_factor, aug_alpha, aug_seed);
        } else if (split_cmd->parsed()) {
            std::vector<ojson> records = read_jsonl(split_in);
            LineSplit split = split_records(records, split_seed);
            fs::create_directories(split_dir);
            write_jsonl(fs::path(split_dir) / "train.jsonl", split.train);
            write_jsonl(fs::path(split_dir) / "valid.jsonl", split.valid);
            write_jsonl(fs::path(split_dir) / "test.jsonl", split.test);
            std::cerr << "split: " << split.train.size() << "/" << split.valid.size() << "/"
                      << split.test.size() << "\n";
        } else if (pre_cmd->parsed()) {
            std::vector<TaggedPair> train_pairs = load_pairs(pre_train);
            std::vector<TaggedPair> valid_pairs;
            if (!pre_valid.empty()) valid_pairs = load_pairs(pre_valid);
            Vocabulary vocab = build_vocab_from_pairs(train_pairs, lexicon,
                                                      pre_flags.vocab_min_freq,
                                                      pre_flags.vocab_max_size);
            const bool keep_tags = !pre_flags.no_review_tag;
            auto train_set =
                build_mlm_dataset(train_pairs, vocab, lexicon, pre_flags.config.max_in_len,
                                  pre_flags.mask_rate, pre_flags.seed, keep_tags);
            auto valid_set =
                build_mlm_dataset(valid_pairs, vocab, lexicon, pre_flags.config.max_in_len,
                                  pre_flags.mask_rate, mix_seed(pre_flags.seed, 1), keep_tags);
            pre_flags.config.seed = pre_flags.seed;
            ModelParameters params =
                ModelParameters::init(pre_flags.config, vocab.size(), pre_flags.seed);
            ModelParameters best = params;
            TrainOptions opts;
            opts.steps = pre_flags.steps;
            opts.eval_every = pre_flags.eval_every;
            opts.lr = pre_flags.config.lr_pretrain;
            opts.batch_size = pre_flags.config.batch_pretrain;
            opts.seed = pre_flags.seed;
            TrainResult result = pretrain_mlm(params, train_set, valid_set, opts, nullptr, &best);
            fs::create_directories(pre_dir);
            vocab.save(fs::path(pre_dir) / "vocab.txt");
            save_checkpoint(fs::path(pre_dir) / "pretrain.ckpt", best, vocab, nullptr,
                            result.best_step > 0 ? result.best_step : result.steps_run);
            write_loss_curve_csv(fs::path(pre_dir) / "pretrain_curve.csv", result.curve);
            std::cerr << "pretrain: " << result.steps_run << " steps, final loss "
                      << result.final_train_loss << ", best valid " << result.best_valid
                      << " @ step " << result.best_step << "\n";
        } else if (fin_cmd->parsed()) {
            std::vector<TaggedPair> train_pairs = load_pairs(fin_train);
            std::vector<TaggedPair> valid_pairs;
            if (!fin_valid.empty()) valid_pairs = load_pairs(fin_valid);
            const bool keep_tags = !fin_flags.no_review_tag;

            ModelParameters params;
            Vocabulary vocab;
            AdamState adam;
            bool have_adam = false;
            int start_step = 0;
            if (!fin_resume.empty()) {
                Checkpoint ck = load_checkpoint(fin_resume);
                params = std::move(ck.params);
                vocab = std::move(ck.vocab);
                adam = std::move(ck.adam);
                have_adam = !adam.m.empty();
                start_step = static_cast<int>(ck.step);
            } else if (!fin_init.empty() && !fin_no_pretrain) {
                Checkpoint ck = load_checkpoint(fin_init);
                vocab = std::move(ck.vocab);
                params = std::move(ck.params);
                params.config.max_in_len = fin_flags.config.max_in_len;
                params.config.max_out_len = fin_flags.config.max_out_len;
            } else {
                vocab = build_vocab_from_pairs(train_pairs, lexicon, fin_flags.vocab_min_freq,
                                               fin_flags.vocab_max_size);
                fin_flags.config.seed = fin_flags.seed;
                params = ModelParameters::init(fin_flags.config, vocab.size(), fin_flags.seed);
            }
            ensure_vocab_matches(params, vocab);

            auto train_set = build_seq2seq_dataset(train_pairs, vocab, lexicon,
                                                   params.config.max_in_len,
                                                   params.config.max_out_len, keep_tags);
            auto valid_set = build_seq2seq_dataset(valid_pairs, vocab, lexicon,
                                                   params.config.max_in_len,
                                                   params.config.max_out_len, keep_tags);
            if (!have_adam) adam = AdamState::init_for(params);
            ModelParameters best = params;
            TrainOptions opts;
            opts.steps = fin_flags.steps;
            opts.eval_every = fin_flags.eval_every;
            opts.lr = fin_flags.config.lr_finetune;
            opts.batch_size = fin_flags.config.batch_finetune;
            opts.seed = fin_flags.seed;
            opts.start_step = start_step;
            TrainResult result = finetune(params, train_set, valid_set, opts, &adam, &best);
            fs::create_directories(fin_dir);
            vocab.save(fs::path(fin_dir) / "vocab.txt");
            save_checkpoint(fs::path(fin_dir) / "finetune.ckpt", params, vocab, &adam,
                            start_step + result.steps_run);
            if (!valid_set.empty()) {
                save_checkpoint(fs::path(fin_dir) / "finetune_best.ckpt", best, vocab, nullptr,
                                result.best_step);
            }
            write_loss_curve_csv(fs::path(fin_dir) / "finetune_curve.csv", result.curve);
            std::cerr << "finetune: " << result.steps_run << " steps, final loss "
                      << result.final_train_loss << "\n";
        } else if (gen_cmd->parsed()) {
            Checkpoint ck = load_checkpoint(gen_ckpt);
            std::vector<TaggedPair> pairs = load_pairs(gen_in);
            DecodeOptions opts;
            opts.beam_width = gen_beam;
            opts.length_penalty = ck.params.config.length_penalty;
            opts.max_out_len = gen_max_out > 0 ? gen_max_out : ck.params.config.max_out_len;
            std::vector<ojson> records;
            size_t warned = 0;
            for (const auto& pair : pairs) {
                std::vector<int> ids =
                    encode(function_tokens(pair, lexicon, !gen_no_tag), ck.vocab,
                           comment_prefix(), static_cast<size_t>(ck.params.config.max_in_len));
                GenerateResult gen = generate_topk(ck.params, ck.vocab, ids, gen_k, opts);
                if (gen.no_tag_warning) ++warned;
                ojson rec;
                rec["id"] = pair.id;
                ojson cands = ojson::array();
                for (const auto& c : gen.candidates) {
                    cands.push_back({{"text", detokenize(c.tokens)}, {"score", c.score}});
                }
                rec["candidates"] = std::move(cands);
                records.push_back(std::move(rec));
            }
            write_jsonl(gen_out, records);
            std::cerr << "generate: " << records.size() << " inputs, top-" << gen_k << " each";
            if (warned) std::cerr << " (" << warned << " without a review tag)";
            std::cerr << "\n";
        } else if (eval_cmd->parsed()) {
            std::vector<ojson> gen_records = read_jsonl(eval_gens);
            std::vector<TaggedPair> ref_pairs = load_pairs(eval_refs);
            std::map<std::string, std::vector<TokenList>> by_id;
            for (const auto& rec : gen_records) {
                std::vector<TokenList> cands;
                for (const auto& c : rec.at("candidates")) {
                    cands.push_back(split_whitespace(c.at("text").get<std::string>()));
                }
                by_id[rec.at("id").get<std::string>()] = std::move(cands);
            }
            std::vector<std::vector<TokenList>> candidates;
            std::vector<TokenList> refs;
            for (const auto& pair : ref_pairs) {
                auto it = by_id.find(pair.id);
                if (it == by_id.end()) continue;
                candidates.push_back(it->second);
                refs.push_back(split_whitespace(pair.comment_prepared));
            }
            std::vector<EvalReport> reports;
            for (const auto& part : split_whitespace(
                     [&] {
                         std::string s = eval_ks;
                         for (auto& c : s) {
                             if (c == ',') c = ' ';
                         }
                         return s;
                     }())) {
                reports.push_back(evaluate_topk(candidates, refs, std::stoi(part)));
            }
            write_report_csv(eval_csv, reports);
            std::cout << format_report_table(reports);
        } else if (apply_cmd->parsed()) {
            Checkpoint ck = load_checkpoint(apply_ckpt);
            std::string content = read_text_file(apply_file);
            DecodeOptions opts;
            opts.length_penalty = ck.params.config.length_penalty;
            opts.max_out_len = ck.params.config.max_out_len;
            ojson output = ojson::array();
            for (const LineRun& range : parse_ranges(apply_lines)) {
                ApplyExtraction ex = tag_file_range(content, range);
                ojson rec;
                rec["lines"] =
                    std::to_string(range.first) + ":" + std::to_string(range.last);
                if (!ex.ok) {
                    rec["error"] = ex.error;
                    output.push_back(std::move(rec));
                    continue;
                }
                std::vector<int> ids =
                    encode(normalize_code(ex.function.text, lexicon).tokens, ck.vocab,
                           comment_prefix(), static_cast<size_t>(ck.params.config.max_in_len));
                GenerateResult gen = generate_topk(ck.params, ck.vocab, ids, apply_k, opts);
                ojson cands = ojson::array();
                for (const auto& c : gen.candidates) {
                    cands.push_back({{"text", detokenize(c.tokens)}, {"score", c.score}});
                }
                rec["comments"] = std::move(cands);
                output.push_back(std::move(rec));
            }
            std::cout << output.dump(2) << "\n";
            for (const auto& rec : output) {
                if (rec.contains("error")) return 2;
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
