#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "revgen/errors.hpp"
#include "revgen/model.hpp"
#include "revgen/pipeline.hpp"

using namespace revgen;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.d_model = 8;
    c.n_layers_enc = 1;
    c.n_layers_dec = 1;
    c.n_heads = 2;
    c.d_ff = 16;
    c.dropout = 0.0;
    c.max_in_len = 16;
    c.max_out_len = 16;
    return c;
}

constexpr size_t kTinyVocab = 12;

std::vector<TrainingExample> tiny_mlm_batchset(uint64_t seed, size_t count) {
    std::mt19937_64 rng(seed);
    std::vector<TrainingExample> out;
    for (size_t e = 0; e < count; ++e) {
        std::vector<int> ids;
        size_t len = 6 + rng() % 5;
        for (size_t i = 0; i < len; ++i) {
            ids.push_back(Vocabulary::kNumSpecials +
                          static_cast<int>(rng() % (kTinyVocab - Vocabulary::kNumSpecials)));
        }
        ids.push_back(Vocabulary::kEos);
        MaskResult m = mask_tokens(ids, 0.25, seed + e);
        TrainingExample ex;
        ex.input_ids = m.masked_ids;
        ex.target_ids = m.original_ids;
        ex.mask_positions = m.positions;
        out.push_back(ex);
    }
    return out;
}

std::vector<TrainingExample> tiny_seq2seq_batchset(uint64_t seed, size_t count) {
    std::mt19937_64 rng(seed);
    std::vector<TrainingExample> out;
    for (size_t e = 0; e < count; ++e) {
        TrainingExample ex;
        size_t in_len = 5 + rng() % 4, out_len = 3 + rng() % 3;
        for (size_t i = 0; i < in_len; ++i) {
            ex.input_ids.push_back(Vocabulary::kNumSpecials +
                                   static_cast<int>(rng() % (kTinyVocab - Vocabulary::kNumSpecials)));
        }
        ex.input_ids.push_back(Vocabulary::kEos);
        for (size_t i = 0; i < out_len; ++i) {
            ex.target_ids.push_back(Vocabulary::kNumSpecials +
                                    static_cast<int>(rng() % (kTinyVocab - Vocabulary::kNumSpecials)));
        }
        ex.target_ids.push_back(Vocabulary::kEos);
        out.push_back(ex);
    }
    return out;
}

std::vector<const TrainingExample*> ptrs(const std::vector<TrainingExample>& v) {
    std::vector<const TrainingExample*> p;
    for (const auto& e : v) p.push_back(&e);
    return p;
}

struct ProbeStats {
    double max_rel_err = 0.0;
    int probed = 0;
};

// central-difference check on `n_probes` random parameter coordinates
ProbeStats gradient_check(ModelParameters& params,
                          const std::vector<const TrainingExample*>& batch, bool use_mlm,
                          int n_probes, uint64_t seed) {
    auto loss_fn = [&](bool grads) {
        return use_mlm ? mlm_loss(params, batch, grads, nullptr)
                       : seq2seq_loss(params, batch, grads, nullptr);
    };
    params.zero_grads();
    loss_fn(true);

    auto refs = params.collect();
    std::vector<std::pair<size_t, Eigen::Index>> coords;
    std::mt19937_64 rng(seed);
    for (int p = 0; p < n_probes; ++p) {
        size_t t = rng() % refs.size();
        Eigen::Index i = static_cast<Eigen::Index>(rng() % refs[t].param->v.size());
        coords.emplace_back(t, i);
    }

    ProbeStats stats;
    const double h = 1e-5;
    for (auto [t, i] : coords) {
        double* slot = refs[t].param->v.data() + i;
        double analytic = *(refs[t].param->g.data() + i);
        double saved = *slot;
        *slot = saved + h;
        double up = loss_fn(false);
        *slot = saved - h;
        double down = loss_fn(false);
        *slot = saved;
        double numeric = (up - down) / (2.0 * h);
        double rel = std::abs(analytic - numeric) /
                     std::max(1e-6, std::abs(analytic) + std::abs(numeric));
        stats.max_rel_err = std::max(stats.max_rel_err, rel);
        ++stats.probed;
    }
    return stats;
}

}  // namespace

TEST_CASE("softmax basics") {
    auto p = softmax({0.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));

    auto q = softmax({1000.0, 0.0});
    CHECK(std::isfinite(q[0]));
    CHECK(q[0] == doctest::Approx(1.0));
    CHECK(q[1] == doctest::Approx(0.0));

    auto r = softmax({1.0, 2.0, 3.0});
    CHECK(r[0] < r[1]);
    CHECK(r[1] < r[2]);
    CHECK(r[0] + r[1] + r[2] == doctest::Approx(1.0).epsilon(1e-9));
    // high-precision direct evaluation
    long double e1 = expl(1.0L), e2 = expl(2.0L), e3 = expl(3.0L);
    long double z = e1 + e2 + e3;
    CHECK(r[0] == doctest::Approx(static_cast<double>(e1 / z)).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(static_cast<double>(e2 / z)).epsilon(1e-12));
    CHECK(r[2] == doctest::Approx(static_cast<double>(e3 / z)).epsilon(1e-12));
}

TEST_CASE("mask_tokens contract") {
    std::vector<int> ids;
    for (int i = 0; i < 20; ++i) ids.push_back(Vocabulary::kNumSpecials + (i % 5));
    MaskResult m = mask_tokens(ids, 0.10, 42);
    CHECK(m.positions.size() == 2);  // round(0.10 * 20)
    for (size_t i = 0; i < m.positions.size(); ++i) {
        CHECK(m.masked_ids[static_cast<size_t>(m.positions[i])] == Vocabulary::kMask);
        CHECK(m.original_ids[i] == ids[static_cast<size_t>(m.positions[i])]);
    }

    MaskResult one = mask_tokens({Vocabulary::kNumSpecials, Vocabulary::kEos}, 0.10, 1);
    CHECK(one.positions.size() == 1);  // max(1, .) rule

    CHECK_THROWS_AS(mask_tokens({Vocabulary::kPad, Vocabulary::kEos}, 0.10, 1),
                    NothingMaskableError);
}

TEST_CASE("mask_tokens never touches protected positions") {
    std::vector<int> ids = {7, 8, Vocabulary::kReviewTag, 9, Vocabulary::kEos};
    for (uint64_t seed = 0; seed < 40; ++seed) {
        MaskResult m = mask_tokens(ids, 0.5, seed, 2);  // first two are prefix
        for (int pos : m.positions) {
            CHECK(pos >= 2);
            CHECK(ids[static_cast<size_t>(pos)] != Vocabulary::kReviewTag);
            CHECK(ids[static_cast<size_t>(pos)] != Vocabulary::kEos);
        }
    }
}

TEST_CASE("mask_tokens deterministic under seed") {
    std::vector<int> ids;
    for (int i = 0; i < 30; ++i) ids.push_back(Vocabulary::kNumSpecials + (i % 7));
    MaskResult a = mask_tokens(ids, 0.2, 99);
    MaskResult b = mask_tokens(ids, 0.2, 99);
    CHECK(a.masked_ids == b.masked_ids);
    CHECK(a.positions == b.positions);
}

TEST_CASE("gradient check: masked-LM loss") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 11);
    auto data = tiny_mlm_batchset(5, 3);
    ProbeStats stats = gradient_check(params, ptrs(data), true, 20, 303);
    CHECK(stats.probed == 20);
    CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("gradient check: generation loss") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 13);
    auto data = tiny_seq2seq_batchset(7, 3);
    ProbeStats stats = gradient_check(params, ptrs(data), false, 20, 404);
    CHECK(stats.probed == 20);
    CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("gradient check: tied output projection") {
    ModelConfig cfg = tiny_config();
    cfg.tie_output = true;
    ModelParameters params = ModelParameters::init(cfg, kTinyVocab, 17);
    auto data = tiny_seq2seq_batchset(9, 2);
    ProbeStats stats = gradient_check(params, ptrs(data), false, 20, 505);
    CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("initial MLM loss is close to ln|V|") {
    ModelConfig cfg = tiny_config();
    cfg.d_model = 16;
    const size_t vocab = 64;
    ModelParameters params = ModelParameters::init(cfg, vocab, 21);
    std::mt19937_64 rng(3);
    std::vector<TrainingExample> data;
    for (int e = 0; e < 16; ++e) {
        std::vector<int> ids;
        for (int i = 0; i < 12; ++i) {
            ids.push_back(Vocabulary::kNumSpecials +
                          static_cast<int>(rng() % (vocab - Vocabulary::kNumSpecials)));
        }
        MaskResult m = mask_tokens(ids, 0.25, 100 + static_cast<uint64_t>(e));
        TrainingExample ex;
        ex.input_ids = m.masked_ids;
        ex.target_ids = m.original_ids;
        ex.mask_positions = m.positions;
        data.push_back(ex);
    }
    double loss = mlm_loss(params, ptrs(data), false, nullptr);
    double expected = std::log(static_cast<double>(vocab));
    CHECK(loss > expected * 0.95);
    CHECK(loss < expected * 1.05);
}

TEST_CASE("lr=0 leaves parameters unchanged") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 31);
    ModelParameters before = params;
    auto data = tiny_mlm_batchset(17, 4);
    TrainOptions opts;
    opts.steps = 5;
    opts.lr = 0.0;
    opts.batch_size = 2;
    opts.dropout_enabled = false;
    pretrain_mlm(params, data, {}, opts);
    auto a = params.collect();
    auto b = before.collect();
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].param->v == b[i].param->v);
    }
}

TEST_CASE("short training run reduces the loss") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 41);
    auto data = tiny_mlm_batchset(23, 24);
    double initial = mlm_loss(params, ptrs(data), false, nullptr);
    TrainOptions opts;
    opts.steps = 60;
    opts.lr = 3e-3;
    opts.batch_size = 8;
    opts.seed = 5;
    opts.dropout_enabled = false;
    pretrain_mlm(params, data, {}, opts);
    double final_loss = mlm_loss(params, ptrs(data), false, nullptr);
    CHECK(final_loss < initial);
}

TEST_CASE("fixed seed gives a bit-identical loss curve") {
    auto run = [] {
        ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 51);
        auto data = tiny_seq2seq_batchset(29, 10);
        TrainOptions opts;
        opts.steps = 20;
        opts.lr = 1e-3;
        opts.batch_size = 4;
        opts.seed = 77;
        return finetune(params, data, {}, opts).curve;
    };
    auto c1 = run();
    auto c2 = run();
    REQUIRE(c1.size() == c2.size());
    for (size_t i = 0; i < c1.size(); ++i) {
        CHECK(c1[i].train_loss == c2[i].train_loss);  // exact bit equality
    }
}

TEST_CASE("loss is invariant under batch permutation") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 61);
    auto data = tiny_seq2seq_batchset(31, 6);
    auto fwd = ptrs(data);
    auto rev = fwd;
    std::reverse(rev.begin(), rev.end());
    double a = seq2seq_loss(params, fwd, false, nullptr);
    double b = seq2seq_loss(params, rev, false, nullptr);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("decoder is causal") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 71);
    std::vector<int> input = {6, 7, 8, Vocabulary::kEos};
    std::vector<int> dec_a = {Vocabulary::kPad, 6, 7, 8, 9};
    std::vector<int> dec_b = dec_a;
    dec_b[3] = 10;  // edit position 3; logits at rows 0..2 must not move
    dec_b[4] = 5;
    Mat la = decoder_logits(params, input, dec_a);
    Mat lb = decoder_logits(params, input, dec_b);
    for (Eigen::Index row = 0; row < 3; ++row) {
        CHECK((la.row(row) - lb.row(row)).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((la.row(3) - lb.row(3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("warm boost: straight 2N equals N plus resumed N") {
    auto data = tiny_seq2seq_batchset(83, 12);
    const int n = 12;

    ModelParameters straight = ModelParameters::init(tiny_config(), kTinyVocab, 91);
    AdamState adam_straight = AdamState::init_for(straight);
    TrainOptions opts;
    opts.steps = 2 * n;
    opts.lr = 1e-3;
    opts.batch_size = 4;
    opts.seed = 123;
    finetune(straight, data, {}, opts, &adam_straight);

    ModelParameters resumed = ModelParameters::init(tiny_config(), kTinyVocab, 91);
    AdamState adam_resumed = AdamState::init_for(resumed);
    TrainOptions first = opts;
    first.steps = n;
    finetune(resumed, data, {}, first, &adam_resumed);
    TrainOptions second = opts;
    second.steps = n;
    second.start_step = n;
    finetune(resumed, data, {}, second, &adam_resumed);

    auto a = straight.collect();
    auto b = resumed.collect();
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].param->v == b[i].param->v);
    }
}

TEST_CASE("checkpoint roundtrip preserves every bit") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 101);
    std::vector<std::string> tokens = Vocabulary::special_tokens();
    for (size_t i = tokens.size(); i < kTinyVocab; ++i) {
        tokens.push_back("tok" + std::to_string(i));
    }
    Vocabulary vocab = Vocabulary::from_tokens(tokens);
    AdamState adam = AdamState::init_for(params);
    auto data = tiny_seq2seq_batchset(111, 6);
    TrainOptions opts;
    opts.steps = 6;
    opts.lr = 1e-3;
    opts.batch_size = 3;
    opts.seed = 9;
    finetune(params, data, {}, opts, &adam);

    auto path = std::filesystem::temp_directory_path() / "revgen_ckpt_test.bin";
    save_checkpoint(path, params, vocab, &adam, 6);
    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.step == 6);
    CHECK(ck.vocab.size() == vocab.size());
    CHECK(ck.adam.t == adam.t);

    auto a = params.collect();
    auto b = ck.params.collect();
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].name == b[i].name);
        CHECK(a[i].param->v == b[i].param->v);
    }
    for (size_t i = 0; i < adam.m.size(); ++i) {
        CHECK(adam.m[i] == ck.adam.m[i]);
        CHECK(adam.v[i] == ck.adam.v[i]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("vocab mismatch is rejected") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 121);
    std::vector<std::string> tokens = Vocabulary::special_tokens();
    tokens.push_back("only");
    Vocabulary small = Vocabulary::from_tokens(tokens);
    CHECK_THROWS_AS(ensure_vocab_matches(params, small), VocabMismatchError);
}

TEST_CASE("config invariants are enforced") {
    ModelConfig bad = tiny_config();
    bad.n_heads = 3;  // 8 % 3 != 0
    CHECK_THROWS_AS(bad.validate(), Error);
    ModelConfig short_len = tiny_config();
    short_len.max_in_len = 4;
    CHECK_THROWS_AS(short_len.validate(), Error);
}

TEST_CASE("non-finite loss raises with a diagnostic") {
    ModelParameters params = ModelParameters::init(tiny_config(), kTinyVocab, 131);
    params.embedding.v(6, 0) = std::numeric_limits<double>::infinity();
    auto data = tiny_seq2seq_batchset(141, 4);
    TrainOptions opts;
    opts.steps = 3;
    opts.lr = 1e-3;
    opts.batch_size = 4;
    CHECK_THROWS_AS(finetune(params, data, {}, opts), NonFiniteLossError);
}
