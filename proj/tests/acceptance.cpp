// Acceptance suite: runs every release criterion and prints one line each.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "revgen/augment.hpp"
#include "revgen/corpus.hpp"
#include "revgen/decode.hpp"
#include "revgen/evalkit.hpp"
#include "revgen/filter.hpp"
#include "revgen/jsonl.hpp"
#include "revgen/model.hpp"
#include "revgen/pipeline.hpp"
#include "revgen/tagger.hpp"
#include "revgen/textprep.hpp"
#include "revgen/vocab.hpp"

namespace fs = std::filesystem;
using namespace revgen;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kFixtures = REVGEN_FIXTURE_DIR;
const std::string kCli = REVGEN_CLI_PATH;

struct Check {
    int number;
    std::string description;
    std::function<void()> run;  // throws on failure
};

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

int run_cli(const std::string& args) {
    std::string cmd = kCli + " " + args + " 2>>cli_log.txt";
    return std::system(cmd.c_str());
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("revgen_accept_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    return read_text_file(a) == read_text_file(b);
}

// ---------------------------------------------------------------------------
// shared model helpers
// ---------------------------------------------------------------------------

ModelConfig small_config(int d_model, int layers, int heads, int d_ff) {
    ModelConfig c;
    c.d_model = d_model;
    c.n_layers_enc = layers;
    c.n_layers_dec = layers;
    c.n_heads = heads;
    c.d_ff = d_ff;
    c.max_in_len = 64;
    c.max_out_len = 16;
    c.dropout = 0.0;
    return c;
}

double dataset_rouge_l(const ModelParameters& params, const Vocabulary& vocab,
                       const std::vector<TrainingExample>& examples,
                       const std::vector<TokenList>& refs, int max_out) {
    double total = 0.0;
    for (size_t i = 0; i < examples.size(); ++i) {
        TokenList hyp = greedy_decode(params, vocab, examples[i].input_ids, max_out);
        total += rouge_l(hyp, refs[i]);
    }
    return total / static_cast<double>(examples.size());
}

// state shared between criteria 5 and 11
struct MemorizedModel {
    ModelParameters params;
    Vocabulary vocab;
    std::vector<TrainingExample> train;
    std::vector<TokenList> refs;
    int steps_used = 0;
};
MemorizedModel g_memorized;

MemorizedModel train_memorization_model() {
    std::vector<TaggedPair> pairs = load_pairs(kFixtures / "memorize_pairs.jsonl");
    require(pairs.size() == 20, "memorization fixture must hold 20 pairs");
    const Lexicon& lex = Lexicon::embedded();

    MemorizedModel m;
    m.vocab = build_vocab_from_pairs(pairs, lex, /*min_freq=*/1, 4000);
    ModelConfig cfg = small_config(48, 1, 4, 96);
    cfg.batch_finetune = 10;
    m.params = ModelParameters::init(cfg, m.vocab.size(), 7);
    m.train = build_seq2seq_dataset(pairs, m.vocab, lex, cfg.max_in_len, cfg.max_out_len);
    for (const auto& p : pairs) m.refs.push_back(split_whitespace(p.comment_prepared));

    auto perfect = [&]() {
        size_t hits = 0;
        for (size_t i = 0; i < m.train.size(); ++i) {
            if (greedy_decode(m.params, m.vocab, m.train[i].input_ids, 16) == m.refs[i]) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(m.train.size());
    };

    TrainOptions opts;
    opts.steps = 3000;
    opts.lr = 1e-3;
    opts.batch_size = cfg.batch_finetune;
    opts.seed = 11;
    opts.eval_every = 0;
    opts.dropout_enabled = false;
    opts.stop_early = [&](int step, double) {
        if (step % 100 != 0 || step < 200) return false;
        return perfect() >= 0.9;
    };
    TrainResult result = finetune(m.params, m.train, {}, opts);
    m.steps_used = result.steps_run;
    return m;
}

// synthetic corpus for the ablation criterion: the comment names the
// variable on the tagged line
struct SyntheticCorpus {
    std::vector<TaggedPair> train;
    std::vector<TaggedPair> test;
};

SyntheticCorpus make_synthetic_corpus(size_t total, uint64_t seed) {
    static const std::vector<std::string> kWords = {
        "counter", "limit",  "buffer", "offset", "status", "total",  "result", "config",
        "handler", "window", "cursor", "branch", "packet", "margin", "weight", "height",
        "depth",   "scale",  "ratio",  "digit",  "label",  "token",  "symbol", "record",
        "column",  "cell",   "block",  "frame",  "signal", "filter", "engine", "module",
        "kernel",  "socket", "thread", "queue",  "anchor", "legend", "border", "bucket"};
    std::mt19937_64 rng(seed);
    SyntheticCorpus corpus;
    for (size_t i = 0; i < total; ++i) {
        std::vector<std::string> w;
        while (w.size() < 4) {
            std::string cand = kWords[rng() % kWords.size()];
            if (std::find(w.begin(), w.end(), cand) == w.end()) w.push_back(cand);
        }
        size_t tagged = rng() % 4;
        std::string fn = "int work(int value) {\n";
        for (size_t line = 0; line < 4; ++line) {
            if (line == tagged) fn += "<review_tag>\n";
            fn += "    int " + w[line] + " = value + " + std::to_string(line + 1) + ";\n";
        }
        fn += "    return value;\n}";
        TaggedPair pair;
        pair.id = "syn" + std::to_string(i);
        pair.function_tagged = fn;
        pair.comment_prepared = "rename " + w[tagged] + " here";
        corpus.train.push_back(pair);
    }
    size_t n_test = total / 5;
    corpus.test.assign(corpus.train.end() - static_cast<long>(n_test), corpus.train.end());
    corpus.train.resize(total - n_test);
    return corpus;
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

void criterion_rouge_oracle() {
    auto start = Clock::now();
    std::mt19937_64 rng(20240817);
    std::vector<std::string> alphabet = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 1000; ++trial) {
        TokenList hyp, ref;
        size_t hl = 1 + rng() % 8, rl = 1 + rng() % 8;
        for (size_t i = 0; i < hl; ++i) hyp.push_back(alphabet[rng() % alphabet.size()]);
        for (size_t i = 0; i < rl; ++i) ref.push_back(alphabet[rng() % alphabet.size()]);

        // brute force over every subsequence of hyp
        size_t best = 0;
        for (size_t mask = 0; mask < (size_t{1} << hl); ++mask) {
            TokenList sub;
            for (size_t i = 0; i < hl; ++i) {
                if (mask & (size_t{1} << i)) sub.push_back(hyp[i]);
            }
            size_t j = 0;
            for (const auto& tok : ref) {
                if (j < sub.size() && tok == sub[j]) ++j;
            }
            if (j == sub.size()) best = std::max(best, sub.size());
        }
        double expected = 0.0;
        if (best > 0) {
            double p = static_cast<double>(best) / static_cast<double>(hl);
            double r = static_cast<double>(best) / static_cast<double>(rl);
            expected = 2.0 * p * r / (p + r);
        }
        double got = rouge_l(hyp, ref);
        require(got == expected || std::abs(got - expected) == 0.0,
                "rouge_l mismatch vs brute force");
    }
    require(seconds_since(start) < 10.0, "rouge oracle run exceeded 10 s");
}

void criterion_worked_metrics() {
    TokenList hyp = {"the", "cat", "sat"};
    TokenList ref = {"the", "cat", "on", "the", "mat"};
    Rouge1 r1 = rouge_1(hyp, ref);
    require(r1.precision == 2.0 / 3.0, "rouge1 precision must be exactly 2/3");
    require(r1.recall == 2.0 / 5.0, "rouge1 recall must be exactly 2/5");
    require(rouge_l(hyp, ref) == 0.5, "rougeL must be exactly 0.5");
}

void criterion_gradients() {
    auto start = Clock::now();
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_layers_enc = 1;
    cfg.n_layers_dec = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    cfg.dropout = 0.0;
    cfg.max_in_len = 16;
    cfg.max_out_len = 16;
    const size_t vocab_size = 12;

    auto probe = [&](bool use_mlm, uint64_t seed) {
        ModelParameters params = ModelParameters::init(cfg, vocab_size, seed);
        std::mt19937_64 rng(seed * 77 + 1);
        std::vector<TrainingExample> data;
        for (int e = 0; e < 3; ++e) {
            TrainingExample ex;
            for (int i = 0; i < 8; ++i) {
                ex.input_ids.push_back(Vocabulary::kNumSpecials + static_cast<int>(rng() % 7));
            }
            if (use_mlm) {
                MaskResult m = mask_tokens(ex.input_ids, 0.25, seed + e);
                ex.input_ids = m.masked_ids;
                ex.target_ids = m.original_ids;
                ex.mask_positions = m.positions;
            } else {
                for (int i = 0; i < 4; ++i) {
                    ex.target_ids.push_back(Vocabulary::kNumSpecials +
                                            static_cast<int>(rng() % 7));
                }
                ex.target_ids.push_back(Vocabulary::kEos);
            }
            data.push_back(ex);
        }
        std::vector<const TrainingExample*> batch;
        for (const auto& e : data) batch.push_back(&e);

        auto loss_of = [&](bool grads) {
            return use_mlm ? mlm_loss(params, batch, grads, nullptr)
                           : seq2seq_loss(params, batch, grads, nullptr);
        };
        params.zero_grads();
        loss_of(true);
        auto refs = params.collect();
        double max_rel = 0.0;
        const double h = 1e-5;
        for (int p = 0; p < 20; ++p) {
            size_t t = rng() % refs.size();
            auto i = static_cast<Eigen::Index>(rng() % refs[t].param->v.size());
            double* slot = refs[t].param->v.data() + i;
            double analytic = *(refs[t].param->g.data() + i);
            double saved = *slot;
            *slot = saved + h;
            double up = loss_of(false);
            *slot = saved - h;
            double down = loss_of(false);
            *slot = saved;
            double numeric = (up - down) / (2.0 * h);
            max_rel = std::max(max_rel, std::abs(analytic - numeric) /
                                            std::max(1e-6, std::abs(analytic) +
                                                               std::abs(numeric)));
        }
        return max_rel;
    };

    double mlm_err = probe(true, 5);
    double gen_err = probe(false, 9);
    require(mlm_err < 1e-4, "masked-LM gradient error " + std::to_string(mlm_err));
    require(gen_err < 1e-4, "generation gradient error " + std::to_string(gen_err));
    require(seconds_since(start) < 60.0, "gradient check exceeded 60 s");
}

void criterion_init_loss() {
    const Lexicon& lex = Lexicon::embedded();
    std::vector<TaggedPair> pairs = load_pairs(kFixtures / "memorize_pairs.jsonl");
    Vocabulary vocab = build_vocab_from_pairs(pairs, lex, 1, 4000);
    ModelConfig cfg = small_config(48, 1, 4, 96);
    ModelParameters params = ModelParameters::init(cfg, vocab.size(), 33);
    auto dataset = build_mlm_dataset(pairs, vocab, lex, cfg.max_in_len, 0.10, 3);
    std::vector<const TrainingExample*> batch;
    for (const auto& e : dataset) batch.push_back(&e);
    double loss = mlm_loss(params, batch, false, nullptr);
    double expected = std::log(static_cast<double>(vocab.size()));
    require(loss > 0.95 * expected && loss < 1.05 * expected,
            "initial loss " + std::to_string(loss) + " vs ln|V| " + std::to_string(expected));
}

void criterion_memorization() {
    auto start = Clock::now();
    g_memorized = train_memorization_model();
    size_t hits = 0;
    for (size_t i = 0; i < g_memorized.train.size(); ++i) {
        TokenList hyp =
            greedy_decode(g_memorized.params, g_memorized.vocab,
                          g_memorized.train[i].input_ids, 16);
        if (hyp == g_memorized.refs[i]) ++hits;
    }
    double pp = static_cast<double>(hits) / static_cast<double>(g_memorized.train.size());
    require(g_memorized.steps_used <= 3000,
            "memorization needed " + std::to_string(g_memorized.steps_used) + " steps");
    require(pp >= 0.9, "perfect prediction " + std::to_string(pp) + " below 0.9");
    require(seconds_since(start) < 600.0, "memorization run exceeded 10 minutes");
}

void criterion_ablations() {
    const Lexicon& lex = Lexicon::embedded();
    SyntheticCorpus corpus = make_synthetic_corpus(500, 2024);

    ModelConfig cfg = small_config(48, 1, 4, 96);
    cfg.tie_output = true;
    cfg.batch_finetune = 16;

    std::vector<TokenList> test_refs;
    for (const auto& p : corpus.test) test_refs.push_back(split_whitespace(p.comment_prepared));

    // --- part 1: review tags vs no tags -----------------------------------
    Vocabulary vocab = build_vocab_from_pairs(corpus.train, lex, 1, 4000);
    auto train_model = [&](bool keep_tags) {
        auto train = build_seq2seq_dataset(corpus.train, vocab, lex, cfg.max_in_len,
                                           cfg.max_out_len, keep_tags);
        ModelParameters params = ModelParameters::init(cfg, vocab.size(), 71);
        TrainOptions opts;
        opts.steps = 900;
        opts.lr = 1e-3;
        opts.batch_size = cfg.batch_finetune;
        opts.seed = 13;
        opts.eval_every = 0;
        opts.dropout_enabled = false;
        finetune(params, train, {}, opts);
        auto test = build_seq2seq_dataset(corpus.test, vocab, lex, cfg.max_in_len,
                                          cfg.max_out_len, keep_tags);
        return dataset_rouge_l(params, vocab, test, test_refs, cfg.max_out_len);
    };
    double tagged = train_model(true);
    double untagged = train_model(false);
    require(tagged - untagged >= 0.05,
            "tagged " + std::to_string(tagged) + " vs untagged " + std::to_string(untagged) +
                ": gap below 5 points");

    // --- part 2: pretraining shortens fine-tuning -------------------------
    const double loss_threshold = 0.35;
    auto steps_to_threshold = [&](bool pretrain_first) {
        ModelParameters params = ModelParameters::init(cfg, vocab.size(), 99);
        if (pretrain_first) {
            auto mlm = build_mlm_dataset(corpus.train, vocab, lex, cfg.max_in_len, 0.10, 5);
            TrainOptions pre;
            pre.steps = 400;
            pre.lr = 1e-3;
            pre.batch_size = 16;
            pre.seed = 21;
            pre.eval_every = 0;
            pre.dropout_enabled = false;
            pretrain_mlm(params, mlm, {}, pre);
        }
        auto train = build_seq2seq_dataset(corpus.train, vocab, lex, cfg.max_in_len,
                                           cfg.max_out_len, true);
        int reached = -1;
        TrainOptions opts;
        opts.steps = 1200;
        opts.lr = 1e-3;
        opts.batch_size = cfg.batch_finetune;
        opts.seed = 23;
        opts.eval_every = 0;
        opts.dropout_enabled = false;
        opts.stop_early = [&](int step, double loss) {
            if (loss <= loss_threshold && reached < 0) {
                reached = step;
                return true;
            }
            return false;
        };
        finetune(params, train, {}, opts);
        return reached < 0 ? opts.steps + 1 : reached;
    };
    int with_pretrain = steps_to_threshold(true);
    int from_scratch = steps_to_threshold(false);
    require(with_pretrain <= static_cast<int>(0.8 * from_scratch),
            "pretrained " + std::to_string(with_pretrain) + " steps vs scratch " +
                std::to_string(from_scratch) + ": ratio above 0.8");
}

void criterion_warm_boost() {
    fs::path dir = fresh_dir("warmboost");
    fs::path pairs = kFixtures / "memorize_pairs.jsonl";
    std::string base = "finetune --train " + pairs.string() +
                       " --no-pretrain --d-model 32 --enc-layers 1 --dec-layers 1 --heads 2"
                       " --d-ff 64 --max-in-len 64 --max-out-len 16 --batch 10 --seed 3"
                       " --vocab-min-freq 1";
    require(run_cli(base + " --steps 24 --out-dir " + (dir / "straight").string()) == 0,
            "straight 2N run failed");
    require(run_cli(base + " --steps 12 --out-dir " + (dir / "half").string()) == 0,
            "first N run failed");
    require(run_cli("finetune --train " + pairs.string() + " --resume " +
                    (dir / "half" / "finetune.ckpt").string() +
                    " --steps 12 --seed 3 --batch 10 --out-dir " +
                    (dir / "resumed").string()) == 0,
            "resumed N run failed");
    require(same_bytes(dir / "straight" / "finetune.ckpt", dir / "resumed" / "finetune.ckpt"),
            "resumed checkpoint differs from the straight run");
}

void criterion_figure3() {
    const Lexicon& lex = Lexicon::embedded();
    require(split_identifier("HavingDefaultValue", lex) ==
                std::vector<std::string>{"having", "default", "value"},
            "HavingDefaultValue must split to having/default/value");
    auto whats = normalize_comment("What's", lex).tokens;
    require(whats == std::vector<std::string>{"what", "be"},
            "What's must expand to what is (lemma be)");
    require(lemmatize("seems") == "seem", "seems -> seem");
    require(lemmatize("is") == "be", "is -> be");
}

void criterion_tagging_roundtrip() {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> lines;
        lines.push_back("class Fuzz" + std::to_string(trial) + " {");
        int methods = 1 + static_cast<int>(rng() % 3);
        for (int m = 0; m < methods; ++m) {
            lines.push_back("  int m" + std::to_string(m) + "(int a) {");
            int body = 2 + static_cast<int>(rng() % 5);
            for (int b = 0; b < body; ++b) {
                lines.push_back("    int v" + std::to_string(b) + " = a + " +
                                std::to_string(rng() % 90) + ";");
            }
            lines.push_back("    return a;");
            lines.push_back("  }");
        }
        lines.push_back("}");

        std::vector<std::string> revised = lines;
        int edits = 1 + static_cast<int>(rng() % 3);
        for (int e = 0; e < edits && revised.size() > 2; ++e) {
            size_t pos = rng() % revised.size();
            switch (rng() % 3) {
                case 0: revised[pos] = "    int changed = a * " +
                                        std::to_string(rng() % 90) + ";"; break;
                case 1: revised.insert(revised.begin() + static_cast<long>(pos),
                                       "    int inserted = 0;"); break;
                case 2: revised.erase(revised.begin() + static_cast<long>(pos)); break;
            }
        }
        std::string sub, rev;
        for (size_t i = 0; i < lines.size(); ++i) sub += lines[i] + "\n";
        for (size_t i = 0; i < revised.size(); ++i) rev += revised[i] + "\n";

        LineDiff diff = diff_lines(sub, rev);
        require(replay_diff(diff) == split_lines(rev), "diff replay failed");

        // recompute the marked (changed or anchor) lines
        std::set<int> marked;
        int last_keep = 0;
        bool has_sub = false;
        for (const auto& op : diff.ops) {
            if (op.sub_line > 0) has_sub = true;
        }
        for (const auto& op : diff.ops) {
            if (op.op == DiffOp::Keep) last_keep = op.sub_line;
            if (op.op == DiffOp::Delete) marked.insert(op.sub_line);
            if (op.op == DiffOp::Insert) marked.insert(last_keep > 0 ? last_keep
                                                                     : (has_sub ? 1 : 0));
        }

        MethodScan scan = scan_methods(sub);
        for (const auto& run : select_valid_modifications(diff, scan.methods)) {
            ExtractResult ex = extract_function(sub, run, scan);
            if (!ex.ok) continue;
            for (int tag : ex.function.tag_lines) {
                require(tag >= ex.function.start_line && tag <= ex.function.end_line,
                        "tag outside the reported function");
                require(marked.count(tag) == 1, "tag on an unchanged, non-anchor line");
            }
        }
    }
}

void criterion_augmentation() {
    const Thesaurus& th = Thesaurus::embedded();
    std::vector<ReviewTriplet> triplets = load_triplets(kFixtures / "raw_corpus.jsonl");
    AugmentConfig cfg;
    cfg.factor = 9;
    cfg.seed = 17;
    size_t checked = 0;
    for (const auto& t : triplets) {
        if (split_whitespace(t.comment).size() < 3) continue;
        AugmentResult r = eda_augment(t, cfg, th);
        require(r.records.size() == 9, "factor 9 must produce exactly 9 records");
        for (const auto& rec : r.records) {
            require(rec.sub_code == t.sub_code, "sub_code changed during augmentation");
            require(rec.rev_code == t.rev_code, "rev_code changed during augmentation");
        }
        if (++checked >= 25) break;
    }
    require(checked >= 20, "not enough eligible fixtures for the augmentation check");
}

void criterion_topk_monotonicity() {
    require(g_memorized.steps_used > 0, "memorization model not trained");
    DecodeOptions opts;
    opts.beam_width = 10;
    opts.max_out_len = 16;
    std::vector<std::vector<TokenList>> candidates;
    for (const auto& ex : g_memorized.train) {
        GenerateResult gen =
            generate_topk(g_memorized.params, g_memorized.vocab, ex.input_ids, 10, opts);
        std::vector<TokenList> cl;
        for (const auto& c : gen.candidates) cl.push_back(c.tokens);
        candidates.push_back(cl);
    }
    EvalReport prev;
    bool first = true;
    for (int k : {1, 3, 6, 10}) {
        EvalReport rep = evaluate_topk(candidates, g_memorized.refs, k);
        if (!first) {
            require(rep.rouge1_p >= prev.rouge1_p, "rouge1 precision decreased with k");
            require(rep.rouge1_r >= prev.rouge1_r, "rouge1 recall decreased with k");
            require(rep.rouge1_f >= prev.rouge1_f, "rouge1 f1 decreased with k");
            require(rep.rougeL >= prev.rougeL, "rougeL decreased with k");
            require(rep.perfect_prediction >= prev.perfect_prediction,
                    "perfect prediction decreased with k");
        }
        prev = rep;
        first = false;
    }
}

void criterion_pipeline_determinism() {
    auto run_pipeline = [&](const fs::path& dir) {
        fs::create_directories(dir);
        std::string raw = (kFixtures / "raw_corpus.jsonl").string();
        require(run_cli("prepare --in " + raw + " --out " + (dir / "prepared.jsonl").string() +
                        " --rejected " + (dir / "rejected.jsonl").string()) == 0,
                "prepare failed");
        require(run_cli("tag --in " + (dir / "prepared.jsonl").string() + " --out " +
                        (dir / "pairs.jsonl").string()) == 0,
                "tag failed");
        require(run_cli("split --in " + (dir / "pairs.jsonl").string() + " --out-dir " +
                        dir.string() + " --seed 5") == 0,
                "split failed");
        std::string dims =
            " --d-model 32 --enc-layers 1 --dec-layers 1 --heads 2 --d-ff 64"
            " --max-out-len 24 --vocab-min-freq 1 --seed 9";
        require(run_cli("pretrain --train " + (dir / "train.jsonl").string() + " --valid " +
                        (dir / "valid.jsonl").string() + " --out-dir " + dir.string() +
                        " --steps 30 --eval-every 10 --batch 8 --max-in-len 96" + dims) == 0,
                "pretrain failed");
        require(run_cli("finetune --train " + (dir / "train.jsonl").string() + " --valid " +
                        (dir / "valid.jsonl").string() + " --init " +
                        (dir / "pretrain.ckpt").string() + " --out-dir " + dir.string() +
                        " --steps 40 --eval-every 20 --batch 8 --max-in-len 96" + dims) == 0,
                "finetune failed");
        require(run_cli("generate --ckpt " + (dir / "finetune.ckpt").string() + " --in " +
                        (dir / "test.jsonl").string() + " --out " +
                        (dir / "generations.jsonl").string() +
                        " --top-k 3 --beam 5 --max-out-len 12") == 0,
                "generate failed");
        require(run_cli("evaluate --gens " + (dir / "generations.jsonl").string() + " --refs " +
                        (dir / "test.jsonl").string() + " --csv " +
                        (dir / "report.csv").string() + " --ks 1,3 > " +
                        (dir / "report.txt").string()) == 0,
                "evaluate failed");
    };

    fs::path d1 = fresh_dir("pipe1");
    fs::path d2 = fresh_dir("pipe2");
    run_pipeline(d1);
    run_pipeline(d2);
    for (const char* name :
         {"prepared.jsonl", "rejected.jsonl", "pairs.jsonl", "train.jsonl", "valid.jsonl",
          "test.jsonl", "vocab.txt", "pretrain.ckpt", "pretrain_curve.csv", "finetune.ckpt",
          "finetune_curve.csv", "generations.jsonl", "report.csv", "report.txt"}) {
        require(same_bytes(d1 / name, d2 / name),
                std::string(name) + " differs between identical runs");
    }
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<Check> checks = {
        {1, "ROUGE-L dynamic program equals brute force on 1000 fuzzed pairs", criterion_rouge_oracle},
        {2, "worked metric values for the cat-sat example are exact", criterion_worked_metrics},
        {3, "analytic gradients match central finite differences (< 1e-4)", criterion_gradients},
        {4, "masked-LM loss at random init is ln|V| within 5%", criterion_init_loss},
        {5, "20-pair memorization reaches 90% perfect prediction in 3000 steps", criterion_memorization},
        {6, "review tags and pretraining both help on the synthetic corpus", criterion_ablations},
        {7, "straight 2N training equals N + resumed N bit for bit", criterion_warm_boost},
        {8, "data preparation reproduces the golden word transformations", criterion_figure3},
        {9, "tag round-trip holds on 200 fuzzed submission/revision pairs", criterion_tagging_roundtrip},
        {10, "augmentation factor 9 gives 9 records with identical code", criterion_augmentation},
        {11, "all metrics are non-decreasing across k in {1,3,6,10}", criterion_topk_monotonicity},
        {12, "the full pipeline is byte-identical across reruns", criterion_pipeline_determinism},
    };

    int only = argc > 1 ? std::atoi(argv[1]) : 0;
    int failures = 0;
    for (auto& check : checks) {
        if (only > 0 && check.number != only) continue;
        auto start = Clock::now();
        std::string status = "PASS";
        std::string detail;
        try {
            check.run();
        } catch (const std::exception& e) {
            status = "FAIL";
            detail = e.what();
            ++failures;
        }
        std::printf("%s  criterion %2d: %s (%.1fs)%s%s\n", status.c_str(), check.number,
                    check.description.c_str(), seconds_since(start),
                    detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
