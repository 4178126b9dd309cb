#include "revgen/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "revgen/errors.hpp"

namespace revgen {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kNegInf = -1e30;
constexpr uint64_t kDropoutSalt = 0xD40F00D5;
constexpr uint64_t kShuffleSalt = 0xBA7C4E55;
constexpr uint64_t kInitSalt = 0x1217AB1E;

}  // namespace

void ModelConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
        throw Error("d_model must be positive and divisible by n_heads");
    }
    if (n_layers_enc < 1 || n_layers_dec < 1 || d_ff < 1) {
        throw Error("layer sizes must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must be in [0,1)");
    if (max_in_len < 8 || max_out_len < 8) throw Error("sequence lengths must be >= 8");
}

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

namespace {

void init_normal(Mat& m, Rng& rng, double std_dev) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = rng.normal() * std_dev;
        }
    }
}

void init_attention(AttentionWeights& a, int d, Rng& rng) {
    a.wq.init_zero(d, d);
    a.wk.init_zero(d, d);
    a.wv.init_zero(d, d);
    a.wo.init_zero(d, d);
    init_normal(a.wq.v, rng, 0.02);
    init_normal(a.wk.v, rng, 0.02);
    init_normal(a.wv.v, rng, 0.02);
    init_normal(a.wo.v, rng, 0.02);
}

void init_layernorm(LayerNormWeights& ln, int d) {
    ln.gain.init_zero(1, d);
    ln.bias.init_zero(1, d);
    ln.gain.v.setOnes();
}

void init_ff(FeedForwardWeights& ff, int d, int d_ff, Rng& rng) {
    ff.w1.init_zero(d, d_ff);
    ff.b1.init_zero(1, d_ff);
    ff.w2.init_zero(d_ff, d);
    ff.b2.init_zero(1, d);
    init_normal(ff.w1.v, rng, 0.02);
    init_normal(ff.w2.v, rng, 0.02);
}

}  // namespace

ModelParameters ModelParameters::init(const ModelConfig& config, size_t vocab_size,
                                      uint64_t seed) {
    config.validate();
    if (vocab_size < Vocabulary::kNumSpecials) throw Error("vocabulary too small");

    ModelParameters p;
    p.config = config;
    p.vocab_size = vocab_size;
    Rng rng(mix_seed(seed, kInitSalt));
    const int d = config.d_model;
    const auto v = static_cast<Eigen::Index>(vocab_size);

    p.embedding.init_zero(v, d);
    init_normal(p.embedding.v, rng, 0.02);

    p.enc.resize(static_cast<size_t>(config.n_layers_enc));
    for (auto& layer : p.enc) {
        init_layernorm(layer.ln1, d);
        init_layernorm(layer.ln2, d);
        init_attention(layer.attn, d, rng);
        init_ff(layer.ff, d, config.d_ff, rng);
    }
    p.dec.resize(static_cast<size_t>(config.n_layers_dec));
    for (auto& layer : p.dec) {
        init_layernorm(layer.ln1, d);
        init_layernorm(layer.ln2, d);
        init_layernorm(layer.ln3, d);
        init_attention(layer.self_attn, d, rng);
        init_attention(layer.cross_attn, d, rng);
        init_ff(layer.ff, d, config.d_ff, rng);
    }
    init_layernorm(p.enc_final_ln, d);
    init_layernorm(p.dec_final_ln, d);

    if (!config.tie_output) {
        p.out_proj.init_zero(d, v);
        init_normal(p.out_proj.v, rng, 0.02);
    }
    p.out_bias.init_zero(1, v);
    p.mlm_w.init_zero(d, v);
    init_normal(p.mlm_w.v, rng, 0.02);
    p.mlm_b.init_zero(1, v);
    return p;
}

std::vector<ParamRef> ModelParameters::collect() {
    std::vector<ParamRef> refs;
    auto add = [&](const std::string& name, Param& p) { refs.push_back({name, &p}); };
    add("embedding", embedding);
    for (size_t i = 0; i < enc.size(); ++i) {
        std::string pre = "enc." + std::to_string(i) + ".";
        add(pre + "ln1.gain", enc[i].ln1.gain);
        add(pre + "ln1.bias", enc[i].ln1.bias);
        add(pre + "attn.wq", enc[i].attn.wq);
        add(pre + "attn.wk", enc[i].attn.wk);
        add(pre + "attn.wv", enc[i].attn.wv);
        add(pre + "attn.wo", enc[i].attn.wo);
        add(pre + "ln2.gain", enc[i].ln2.gain);
        add(pre + "ln2.bias", enc[i].ln2.bias);
        add(pre + "ff.w1", enc[i].ff.w1);
        add(pre + "ff.b1", enc[i].ff.b1);
        add(pre + "ff.w2", enc[i].ff.w2);
        add(pre + "ff.b2", enc[i].ff.b2);
    }
    for (size_t i = 0; i < dec.size(); ++i) {
        std::string pre = "dec." + std::to_string(i) + ".";
        add(pre + "ln1.gain", dec[i].ln1.gain);
        add(pre + "ln1.bias", dec[i].ln1.bias);
        add(pre + "self.wq", dec[i].self_attn.wq);
        add(pre + "self.wk", dec[i].self_attn.wk);
        add(pre + "self.wv", dec[i].self_attn.wv);
        add(pre + "self.wo", dec[i].self_attn.wo);
        add(pre + "ln2.gain", dec[i].ln2.gain);
        add(pre + "ln2.bias", dec[i].ln2.bias);
        add(pre + "cross.wq", dec[i].cross_attn.wq);
        add(pre + "cross.wk", dec[i].cross_attn.wk);
        add(pre + "cross.wv", dec[i].cross_attn.wv);
        add(pre + "cross.wo", dec[i].cross_attn.wo);
        add(pre + "ln3.gain", dec[i].ln3.gain);
        add(pre + "ln3.bias", dec[i].ln3.bias);
        add(pre + "ff.w1", dec[i].ff.w1);
        add(pre + "ff.b1", dec[i].ff.b1);
        add(pre + "ff.w2", dec[i].ff.w2);
        add(pre + "ff.b2", dec[i].ff.b2);
    }
    add("enc_final_ln.gain", enc_final_ln.gain);
    add("enc_final_ln.bias", enc_final_ln.bias);
    add("dec_final_ln.gain", dec_final_ln.gain);
    add("dec_final_ln.bias", dec_final_ln.bias);
    if (!config.tie_output) add("out_proj", out_proj);
    add("out_bias", out_bias);
    add("mlm_w", mlm_w);
    add("mlm_b", mlm_b);
    return refs;
}

std::vector<ParamRef> ModelParameters::collect() const {
    return const_cast<ModelParameters*>(this)->collect();
}

void ModelParameters::zero_grads() {
    for (auto& ref : collect()) ref.param->g.setZero();
}

size_t ModelParameters::total_params() const {
    size_t n = 0;
    for (const auto& ref : collect()) n += static_cast<size_t>(ref.param->v.size());
    return n;
}

bool ModelParameters::all_finite() const {
    for (const auto& ref : collect()) {
        if (!ref.param->v.allFinite()) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// small ops
// ---------------------------------------------------------------------------

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& x : out) x /= sum;
    return out;
}

MaskResult mask_tokens(const std::vector<int>& ids, double rate, uint64_t seed,
                       size_t protected_prefix_len) {
    if (ids.empty()) throw NothingMaskableError("empty sequence");
    if (rate <= 0.0 || rate >= 1.0) throw Error("mask rate must be in (0,1)");

    auto maskable = [&](size_t i) {
        if (i < protected_prefix_len) return false;
        int id = ids[i];
        return id != Vocabulary::kPad && id != Vocabulary::kEos && id != Vocabulary::kMask &&
               id != Vocabulary::kReviewTag;
    };
    std::vector<size_t> candidates;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (maskable(i)) candidates.push_back(i);
    }
    if (candidates.empty()) throw NothingMaskableError("all tokens are protected");

    size_t n_mask = std::max<size_t>(
        1, static_cast<size_t>(std::llround(rate * static_cast<double>(candidates.size()))));
    n_mask = std::min(n_mask, candidates.size());

    Rng rng(seed);
    rng.shuffle(candidates);
    candidates.resize(n_mask);
    std::sort(candidates.begin(), candidates.end());

    MaskResult result;
    result.masked_ids = ids;
    for (size_t pos : candidates) {
        result.positions.push_back(static_cast<int>(pos));
        result.original_ids.push_back(ids[pos]);
        result.masked_ids[pos] = Vocabulary::kMask;
    }
    return result;
}

// ---------------------------------------------------------------------------
// forward/backward building blocks
// ---------------------------------------------------------------------------

namespace {

Mat positional_encoding(Eigen::Index t, int d) {
    Mat pe(t, d);
    for (Eigen::Index pos = 0; pos < t; ++pos) {
        for (int i = 0; i < d; i += 2) {
            double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            pe(pos, i) = std::sin(angle);
            if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

// inverted dropout; empty mask means identity
Mat make_dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
    if (!rng || p <= 0.0) return {};
    Mat mask(rows, cols);
    const double scale = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            mask(i, j) = rng->uniform() < p ? 0.0 : scale;
        }
    }
    return mask;
}

inline void apply_mask(Mat& x, const Mat& mask) {
    if (mask.size() > 0) x = x.cwiseProduct(mask);
}

struct LnCache {
    Mat xhat;
    Eigen::VectorXd inv_std;
};

Mat layernorm_forward(const Mat& x, const LayerNormWeights& w, LnCache* cache) {
    const Eigen::Index t = x.rows(), d = x.cols();
    Mat xhat(t, d);
    Eigen::VectorXd inv_std(t);
    for (Eigen::Index i = 0; i < t; ++i) {
        double mu = x.row(i).mean();
        double var = (x.row(i).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + kLnEps);
        xhat.row(i) = (x.row(i).array() - mu) * is;
        inv_std(i) = is;
    }
    Mat out = (xhat.array().rowwise() * w.gain.v.row(0).array()).rowwise() +
              w.bias.v.row(0).array();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

Mat layernorm_backward(const Mat& dy, LayerNormWeights& w, const LnCache& cache) {
    const Eigen::Index t = dy.rows(), d = dy.cols();
    w.gain.g.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
    w.bias.g.row(0) += dy.colwise().sum();
    Mat dxhat = dy.array().rowwise() * w.gain.v.row(0).array();
    Mat dx(t, d);
    for (Eigen::Index i = 0; i < t; ++i) {
        double mean_dxhat = dxhat.row(i).mean();
        double mean_dxhat_xhat = dxhat.row(i).cwiseProduct(cache.xhat.row(i)).mean();
        dx.row(i) = (cache.inv_std(i) *
                     (dxhat.row(i).array() - mean_dxhat -
                      cache.xhat.row(i).array() * mean_dxhat_xhat))
                        .matrix();
    }
    return dx;
}

struct AttnCache {
    Mat a;  // query-side input (post-LN)
    Mat b;  // key/value-side input
    Mat q, k, v;
    std::vector<Mat> probs;       // per head, pre-dropout
    std::vector<Mat> prob_masks;  // dropout masks on probs
    Mat concat;                   // heads concatenated, pre-Wo
};

Mat attention_forward(const Mat& a, const Mat& b, const AttentionWeights& w, int n_heads,
                      bool causal, AttnCache* cache, double p, Rng* rng) {
    const Eigen::Index t = a.rows(), s = b.rows(), d = a.cols();
    const Eigen::Index dh = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat q = a * w.wq.v;
    Mat k = b * w.wk.v;
    Mat v = b * w.wv.v;
    Mat concat(t, d);
    std::vector<Mat> probs(static_cast<size_t>(n_heads));
    std::vector<Mat> prob_masks(static_cast<size_t>(n_heads));

    for (int h = 0; h < n_heads; ++h) {
        auto qh = q.middleCols(h * dh, dh);
        auto kh = k.middleCols(h * dh, dh);
        auto vh = v.middleCols(h * dh, dh);
        Mat scores = (qh * kh.transpose()) * scale;
        if (causal) {
            for (Eigen::Index i = 0; i < t; ++i) {
                for (Eigen::Index j = i + 1; j < s; ++j) scores(i, j) = kNegInf;
            }
        }
        // row softmax with max subtraction
        Mat pmat(t, s);
        for (Eigen::Index i = 0; i < t; ++i) {
            double mx = scores.row(i).maxCoeff();
            Eigen::ArrayXd e = (scores.row(i).array() - mx).exp();
            pmat.row(i) = e / e.sum();
        }
        Mat mask = make_dropout_mask(t, s, p, rng);
        Mat pdrop = pmat;
        apply_mask(pdrop, mask);
        concat.middleCols(h * dh, dh) = pdrop * vh;
        probs[static_cast<size_t>(h)] = std::move(pmat);
        prob_masks[static_cast<size_t>(h)] = std::move(mask);
    }
    Mat out = concat * w.wo.v;
    if (cache) {
        cache->a = a;
        cache->b = b;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
        cache->prob_masks = std::move(prob_masks);
        cache->concat = std::move(concat);
    }
    return out;
}

// returns d(a); accumulates d(b) into db
Mat attention_backward(const Mat& dout, AttentionWeights& w, int n_heads, const AttnCache& cache,
                       Mat& db) {
    const Eigen::Index t = cache.a.rows(), d = cache.a.cols();
    const Eigen::Index dh = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    w.wo.g += cache.concat.transpose() * dout;
    Mat dconcat = dout * w.wo.v.transpose();

    Mat dq = Mat::Zero(t, d);
    Mat dk = Mat::Zero(cache.b.rows(), d);
    Mat dv = Mat::Zero(cache.b.rows(), d);

    for (int h = 0; h < n_heads; ++h) {
        const Mat& pmat = cache.probs[static_cast<size_t>(h)];
        const Mat& mask = cache.prob_masks[static_cast<size_t>(h)];
        auto vh = cache.v.middleCols(h * dh, dh);
        auto qh = cache.q.middleCols(h * dh, dh);
        auto kh = cache.k.middleCols(h * dh, dh);
        Mat dOh = dconcat.middleCols(h * dh, dh);

        Mat pdrop = pmat;
        if (mask.size() > 0) pdrop = pmat.cwiseProduct(mask);
        dv.middleCols(h * dh, dh) += pdrop.transpose() * dOh;
        Mat dpdrop = dOh * vh.transpose();
        if (mask.size() > 0) dpdrop = dpdrop.cwiseProduct(mask);
        // softmax backward: ds = p .* (dp - rowsum(dp .* p))
        Mat ds(pmat.rows(), pmat.cols());
        for (Eigen::Index i = 0; i < pmat.rows(); ++i) {
            double dot = dpdrop.row(i).cwiseProduct(pmat.row(i)).sum();
            ds.row(i) = (pmat.row(i).array() * (dpdrop.row(i).array() - dot)).matrix();
        }
        dq.middleCols(h * dh, dh) += (ds * kh) * scale;
        dk.middleCols(h * dh, dh) += (ds.transpose() * qh) * scale;
    }

    w.wq.g += cache.a.transpose() * dq;
    w.wk.g += cache.b.transpose() * dk;
    w.wv.g += cache.b.transpose() * dv;
    db += dk * w.wk.v.transpose() + dv * w.wv.v.transpose();
    return dq * w.wq.v.transpose();
}

struct FfCache {
    Mat in;
    Mat z;       // pre-activation
    Mat hdrop;   // post-relu post-dropout
    Mat h_mask;  // dropout mask on hidden
};

Mat ff_forward(const Mat& x, const FeedForwardWeights& w, FfCache* cache, double p, Rng* rng) {
    Mat z = (x * w.w1.v).rowwise() + w.b1.v.row(0);
    Mat h = z.cwiseMax(0.0);
    Mat mask = make_dropout_mask(h.rows(), h.cols(), p, rng);
    apply_mask(h, mask);
    Mat out = (h * w.w2.v).rowwise() + w.b2.v.row(0);
    if (cache) {
        cache->in = x;
        cache->z = std::move(z);
        cache->hdrop = std::move(h);
        cache->h_mask = std::move(mask);
    }
    return out;
}

Mat ff_backward(const Mat& dout, FeedForwardWeights& w, const FfCache& cache) {
    w.w2.g += cache.hdrop.transpose() * dout;
    w.b2.g.row(0) += dout.colwise().sum();
    Mat dh = dout * w.w2.v.transpose();
    apply_mask(dh, cache.h_mask);
    Mat dz = (cache.z.array() > 0.0).cast<double>() * dh.array();
    w.w1.g += cache.in.transpose() * dz;
    w.b1.g.row(0) += dz.colwise().sum();
    return dz * w.w1.v.transpose();
}

Mat embed_ids(const ModelParameters& p, const std::vector<int>& ids) {
    const int d = p.config.d_model;
    const double s = std::sqrt(static_cast<double>(d));
    Mat x(static_cast<Eigen::Index>(ids.size()), d);
    for (size_t i = 0; i < ids.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = p.embedding.v.row(ids[i]) * s;
    }
    x += positional_encoding(x.rows(), d);
    return x;
}

void embed_backward(ModelParameters& p, const std::vector<int>& ids, const Mat& dx) {
    const double s = std::sqrt(static_cast<double>(p.config.d_model));
    for (size_t i = 0; i < ids.size(); ++i) {
        p.embedding.g.row(ids[i]) += dx.row(static_cast<Eigen::Index>(i)) * s;
    }
}

struct SublayerActs {
    LnCache ln;
    AttnCache attn;
    FfCache ff;
    Mat drop_mask;
};

struct EncActs {
    std::vector<int> ids;
    std::vector<Mat> x;  // x[0] = embedded, x[l+1] after layer l
    std::vector<SublayerActs> attn_acts;
    std::vector<SublayerActs> ff_acts;
    LnCache final_ln;
    Mat out;
};

struct DecActs {
    std::vector<int> ids;
    std::vector<Mat> x;
    std::vector<SublayerActs> self_acts;
    std::vector<SublayerActs> cross_acts;
    std::vector<SublayerActs> ff_acts;
    LnCache final_ln;
    Mat out;
};

EncActs encoder_run(const ModelParameters& p, const std::vector<int>& ids, double dropout_p,
                    Rng* rng) {
    EncActs acts;
    acts.ids = ids;
    acts.x.push_back(embed_ids(p, ids));
    acts.attn_acts.resize(p.enc.size());
    acts.ff_acts.resize(p.enc.size());
    for (size_t l = 0; l < p.enc.size(); ++l) {
        const auto& w = p.enc[l];
        Mat x = acts.x.back();

        SublayerActs& sa = acts.attn_acts[l];
        Mat a = layernorm_forward(x, w.ln1, &sa.ln);
        Mat attn = attention_forward(a, a, w.attn, p.config.n_heads, false, &sa.attn, dropout_p,
                                     rng);
        sa.drop_mask = make_dropout_mask(attn.rows(), attn.cols(), dropout_p, rng);
        apply_mask(attn, sa.drop_mask);
        x += attn;

        SublayerActs& fa = acts.ff_acts[l];
        Mat f = layernorm_forward(x, w.ln2, &fa.ln);
        Mat ff = ff_forward(f, w.ff, &fa.ff, dropout_p, rng);
        fa.drop_mask = make_dropout_mask(ff.rows(), ff.cols(), dropout_p, rng);
        apply_mask(ff, fa.drop_mask);
        x += ff;

        acts.x.push_back(std::move(x));
    }
    acts.out = layernorm_forward(acts.x.back(), p.enc_final_ln, &acts.final_ln);
    return acts;
}

void encoder_backprop(ModelParameters& p, const EncActs& acts, const Mat& dout) {
    Mat dx = layernorm_backward(dout, p.enc_final_ln, acts.final_ln);
    for (size_t l = p.enc.size(); l-- > 0;) {
        auto& w = p.enc[l];
        // feed-forward sublayer
        {
            const SublayerActs& fa = acts.ff_acts[l];
            Mat dff = dx;
            apply_mask(dff, fa.drop_mask);
            Mat df = ff_backward(dff, w.ff, fa.ff);
            dx += layernorm_backward(df, w.ln2, fa.ln);
        }
        // self-attention sublayer
        {
            const SublayerActs& sa = acts.attn_acts[l];
            Mat dattn = dx;
            apply_mask(dattn, sa.drop_mask);
            Mat da_kv = Mat::Zero(dx.rows(), dx.cols());
            Mat da = attention_backward(dattn, w.attn, p.config.n_heads, sa.attn, da_kv);
            da += da_kv;  // queries and keys/values share the same input
            dx += layernorm_backward(da, w.ln1, sa.ln);
        }
    }
    embed_backward(p, acts.ids, dx);
}

DecActs decoder_run(const ModelParameters& p, const std::vector<int>& dec_ids, const Mat& enc_out,
                    double dropout_p, Rng* rng) {
    DecActs acts;
    acts.ids = dec_ids;
    acts.x.push_back(embed_ids(p, dec_ids));
    acts.self_acts.resize(p.dec.size());
    acts.cross_acts.resize(p.dec.size());
    acts.ff_acts.resize(p.dec.size());
    for (size_t l = 0; l < p.dec.size(); ++l) {
        const auto& w = p.dec[l];
        Mat x = acts.x.back();

        SublayerActs& sa = acts.self_acts[l];
        Mat a = layernorm_forward(x, w.ln1, &sa.ln);
        Mat attn = attention_forward(a, a, w.self_attn, p.config.n_heads, true, &sa.attn,
                                     dropout_p, rng);
        sa.drop_mask = make_dropout_mask(attn.rows(), attn.cols(), dropout_p, rng);
        apply_mask(attn, sa.drop_mask);
        x += attn;

        SublayerActs& ca = acts.cross_acts[l];
        Mat c = layernorm_forward(x, w.ln2, &ca.ln);
        Mat cross = attention_forward(c, enc_out, w.cross_attn, p.config.n_heads, false,
                                      &ca.attn, dropout_p, rng);
        ca.drop_mask = make_dropout_mask(cross.rows(), cross.cols(), dropout_p, rng);
        apply_mask(cross, ca.drop_mask);
        x += cross;

        SublayerActs& fa = acts.ff_acts[l];
        Mat f = layernorm_forward(x, w.ln3, &fa.ln);
        Mat ff = ff_forward(f, w.ff, &fa.ff, dropout_p, rng);
        fa.drop_mask = make_dropout_mask(ff.rows(), ff.cols(), dropout_p, rng);
        apply_mask(ff, fa.drop_mask);
        x += ff;

        acts.x.push_back(std::move(x));
    }
    acts.out = layernorm_forward(acts.x.back(), p.dec_final_ln, &acts.final_ln);
    return acts;
}

// returns gradient wrt enc_out
Mat decoder_backprop(ModelParameters& p, const DecActs& acts, const Mat& dout,
                     Eigen::Index enc_rows) {
    Mat denc = Mat::Zero(enc_rows, p.config.d_model);
    Mat dx = layernorm_backward(dout, p.dec_final_ln, acts.final_ln);
    for (size_t l = p.dec.size(); l-- > 0;) {
        auto& w = p.dec[l];
        {
            const SublayerActs& fa = acts.ff_acts[l];
            Mat dff = dx;
            apply_mask(dff, fa.drop_mask);
            Mat df = ff_backward(dff, w.ff, fa.ff);
            dx += layernorm_backward(df, w.ln3, fa.ln);
        }
        {
            const SublayerActs& ca = acts.cross_acts[l];
            Mat dcross = dx;
            apply_mask(dcross, ca.drop_mask);
            Mat dc = attention_backward(dcross, w.cross_attn, p.config.n_heads, ca.attn, denc);
            dx += layernorm_backward(dc, w.ln2, ca.ln);
        }
        {
            const SublayerActs& sa = acts.self_acts[l];
            Mat dattn = dx;
            apply_mask(dattn, sa.drop_mask);
            Mat da_kv = Mat::Zero(dx.rows(), dx.cols());
            Mat da = attention_backward(dattn, w.self_attn, p.config.n_heads, sa.attn, da_kv);
            da += da_kv;
            dx += layernorm_backward(da, w.ln1, sa.ln);
        }
    }
    embed_backward(p, acts.ids, dx);
    return denc;
}

// cross-entropy over rows of logits; adds dlogits into provided matrix
double cross_entropy_rows(const Mat& logits, const std::vector<int>& targets, double inv_count,
                          Mat* dlogits) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double mx = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
        double z = e.sum();
        double lse = mx + std::log(z);
        loss += (lse - logits(i, targets[static_cast<size_t>(i)])) * inv_count;
        if (dlogits) {
            dlogits->row(i) = (e / z).matrix() * inv_count;
            (*dlogits)(i, targets[static_cast<size_t>(i)]) -= inv_count;
        }
    }
    return loss;
}

std::vector<int> decoder_inputs_for(const std::vector<int>& target_ids) {
    std::vector<int> in;
    in.reserve(target_ids.size());
    in.push_back(Vocabulary::kPad);  // start-of-sequence token
    in.insert(in.end(), target_ids.begin(), target_ids.end() - 1);
    return in;
}

Mat output_logits(const ModelParameters& p, const Mat& dec_out) {
    if (p.config.tie_output) {
        return ((dec_out * p.embedding.v.transpose()).rowwise() + p.out_bias.v.row(0));
    }
    return ((dec_out * p.out_proj.v).rowwise() + p.out_bias.v.row(0));
}

Mat output_logits_backward(ModelParameters& p, const Mat& dec_out, const Mat& dlogits) {
    p.out_bias.g.row(0) += dlogits.colwise().sum();
    if (p.config.tie_output) {
        p.embedding.g += dlogits.transpose() * dec_out;
        return dlogits * p.embedding.v;
    }
    p.out_proj.g += dec_out.transpose() * dlogits;
    return dlogits * p.out_proj.v.transpose();
}

}  // namespace

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

double mlm_loss(ModelParameters& params, const std::vector<const TrainingExample*>& batch,
                bool with_grads, Rng* dropout_rng) {
    size_t total_masked = 0;
    for (const auto* ex : batch) total_masked += ex->mask_positions.size();
    if (total_masked == 0) throw NothingMaskableError("batch has no masked positions");
    const double inv = 1.0 / static_cast<double>(total_masked);
    const double p_drop = dropout_rng ? params.config.dropout : 0.0;

    double loss = 0.0;
    for (const auto* ex : batch) {
        EncActs acts = encoder_run(params, ex->input_ids, p_drop, dropout_rng);
        const auto n_mask = static_cast<Eigen::Index>(ex->mask_positions.size());
        Mat hidden(n_mask, params.config.d_model);
        for (Eigen::Index i = 0; i < n_mask; ++i) {
            hidden.row(i) = acts.out.row(ex->mask_positions[static_cast<size_t>(i)]);
        }
        Mat logits = (hidden * params.mlm_w.v).rowwise() + params.mlm_b.v.row(0);
        Mat dlogits;
        if (with_grads) dlogits = Mat::Zero(logits.rows(), logits.cols());
        loss += cross_entropy_rows(logits, ex->target_ids, inv, with_grads ? &dlogits : nullptr);
        if (with_grads) {
            params.mlm_b.g.row(0) += dlogits.colwise().sum();
            params.mlm_w.g += hidden.transpose() * dlogits;
            Mat dhidden = dlogits * params.mlm_w.v.transpose();
            Mat dout = Mat::Zero(acts.out.rows(), acts.out.cols());
            for (Eigen::Index i = 0; i < n_mask; ++i) {
                dout.row(ex->mask_positions[static_cast<size_t>(i)]) += dhidden.row(i);
            }
            encoder_backprop(params, acts, dout);
        }
    }
    return loss;
}

double seq2seq_loss(ModelParameters& params, const std::vector<const TrainingExample*>& batch,
                    bool with_grads, Rng* dropout_rng) {
    size_t total_positions = 0;
    for (const auto* ex : batch) {
        for (int t : ex->target_ids) {
            if (t != Vocabulary::kPad) ++total_positions;
        }
    }
    if (total_positions == 0) throw Error("batch has no target tokens");
    const double inv = 1.0 / static_cast<double>(total_positions);
    const double p_drop = dropout_rng ? params.config.dropout : 0.0;

    double loss = 0.0;
    for (const auto* ex : batch) {
        EncActs enc_acts = encoder_run(params, ex->input_ids, p_drop, dropout_rng);
        std::vector<int> dec_in = decoder_inputs_for(ex->target_ids);
        DecActs dec_acts = decoder_run(params, dec_in, enc_acts.out, p_drop, dropout_rng);
        Mat logits = output_logits(params, dec_acts.out);

        // positions with PAD targets are excluded from the loss
        Mat dlogits;
        if (with_grads) dlogits = Mat::Zero(logits.rows(), logits.cols());
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            int target = ex->target_ids[static_cast<size_t>(i)];
            if (target == Vocabulary::kPad) continue;
            double mx = logits.row(i).maxCoeff();
            Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
            double z = e.sum();
            loss += (mx + std::log(z) - logits(i, target)) * inv;
            if (with_grads) {
                dlogits.row(i) = (e / z).matrix() * inv;
                dlogits(i, target) -= inv;
            }
        }
        if (with_grads) {
            Mat ddec = output_logits_backward(params, dec_acts.out, dlogits);
            Mat denc = decoder_backprop(params, dec_acts, ddec, enc_acts.out.rows());
            encoder_backprop(params, enc_acts, denc);
        }
    }
    return loss;
}

Mat encode_sequence(const ModelParameters& params, const std::vector<int>& input_ids) {
    return encoder_run(const_cast<ModelParameters&>(params), input_ids, 0.0, nullptr).out;
}

Mat decoder_logits(const ModelParameters& params, const std::vector<int>& input_ids,
                   const std::vector<int>& decoder_input_ids) {
    auto& p = const_cast<ModelParameters&>(params);
    EncActs enc = encoder_run(p, input_ids, 0.0, nullptr);
    DecActs dec = decoder_run(p, decoder_input_ids, enc.out, 0.0, nullptr);
    return output_logits(p, dec.out);
}

Mat decoder_logits_cached(const ModelParameters& params, const Mat& enc_out,
                          const std::vector<int>& decoder_input_ids) {
    auto& p = const_cast<ModelParameters&>(params);
    DecActs dec = decoder_run(p, decoder_input_ids, enc_out, 0.0, nullptr);
    return output_logits(p, dec.out);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState AdamState::init_for(ModelParameters& params) {
    AdamState s;
    for (auto& ref : params.collect()) {
        s.m.push_back(Mat::Zero(ref.param->v.rows(), ref.param->v.cols()));
        s.v.push_back(Mat::Zero(ref.param->v.rows(), ref.param->v.cols()));
    }
    return s;
}

void adam_step(ModelParameters& params, AdamState& state, double lr, double clip_norm) {
    auto refs = params.collect();
    if (state.m.size() != refs.size()) throw Error("optimizer state does not match model");

    if (clip_norm > 0.0) {
        double sq = 0.0;
        for (auto& ref : refs) sq += ref.param->g.squaredNorm();
        double norm = std::sqrt(sq);
        if (norm > clip_norm) {
            double scale = clip_norm / norm;
            for (auto& ref : refs) ref.param->g *= scale;
        }
    }

    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < refs.size(); ++i) {
        Mat& g = refs[i].param->g;
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
        Mat mhat = state.m[i] / bc1;
        Mat vhat = state.v[i] / bc2;
        refs[i].param->v -=
            lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + state.eps).matrix());
    }
}

// ---------------------------------------------------------------------------
// training loops
// ---------------------------------------------------------------------------

namespace {

using LossFn = double (*)(ModelParameters&, const std::vector<const TrainingExample*>&, bool,
                          Rng*);

double dataset_loss(ModelParameters& params, const std::vector<TrainingExample>& data,
                    int batch_size, LossFn loss_fn) {
    // weighted mean over the whole set, batched only to bound memory
    double total = 0.0;
    size_t total_weight = 0;
    auto weight_of = [&](const TrainingExample& ex) {
        if (!ex.mask_positions.empty()) return ex.mask_positions.size();
        size_t n = 0;
        for (int t : ex.target_ids) {
            if (t != Vocabulary::kPad) ++n;
        }
        return n;
    };
    for (size_t start = 0; start < data.size(); start += static_cast<size_t>(batch_size)) {
        std::vector<const TrainingExample*> batch;
        size_t w = 0;
        for (size_t i = start; i < std::min(data.size(), start + static_cast<size_t>(batch_size));
             ++i) {
            batch.push_back(&data[i]);
            w += weight_of(data[i]);
        }
        total += loss_fn(params, batch, false, nullptr) * static_cast<double>(w);
        total_weight += w;
    }
    return total_weight == 0 ? 0.0 : total / static_cast<double>(total_weight);
}

TrainResult run_training(ModelParameters& params, const std::vector<TrainingExample>& train,
                         const std::vector<TrainingExample>& valid, const TrainOptions& options,
                         AdamState* adam, ModelParameters* best_params, LossFn loss_fn) {
    if (train.empty()) throw EmptyCorpusError("training set is empty");
    if (options.steps < 0) throw Error("steps must be >= 0");

    AdamState local_adam;
    if (!adam) {
        local_adam = AdamState::init_for(params);
        adam = &local_adam;
    }

    const size_t n = train.size();
    const auto bs = static_cast<size_t>(std::max(1, options.batch_size));
    const size_t batches_per_epoch = (n + bs - 1) / bs;

    TrainResult result;
    std::vector<size_t> perm(n);
    int64_t perm_epoch = -1;

    for (int step = options.start_step; step < options.start_step + options.steps; ++step) {
        const auto epoch = static_cast<int64_t>(step / static_cast<int>(batches_per_epoch));
        const auto batch_idx = static_cast<size_t>(step % static_cast<int>(batches_per_epoch));
        if (epoch != perm_epoch) {
            std::iota(perm.begin(), perm.end(), size_t{0});
            Rng shuffle_rng(mix_seed(mix_seed(options.seed, kShuffleSalt),
                                     static_cast<uint64_t>(epoch)));
            shuffle_rng.shuffle(perm);
            perm_epoch = epoch;
        }

        std::vector<const TrainingExample*> batch;
        for (size_t i = batch_idx * bs; i < std::min(n, (batch_idx + 1) * bs); ++i) {
            batch.push_back(&train[perm[i]]);
        }

        params.zero_grads();
        Rng step_rng(mix_seed(mix_seed(options.seed, kDropoutSalt),
                              static_cast<uint64_t>(step)));
        Rng* drop = options.dropout_enabled && params.config.dropout > 0.0 ? &step_rng : nullptr;
        double loss = loss_fn(params, batch, true, drop);
        if (!std::isfinite(loss)) {
            std::string ids;
            for (const auto* ex : batch) {
                ids += " len=" + std::to_string(ex->input_ids.size());
            }
            throw NonFiniteLossError("non-finite loss at step " + std::to_string(step) +
                                     "; batch:" + ids);
        }
        adam_step(params, *adam, options.lr, options.clip_norm);

        CurvePoint point;
        point.step = step + 1;
        point.train_loss = loss;
        if (!valid.empty() && options.eval_every > 0 &&
            ((step + 1) % options.eval_every == 0 ||
             step + 1 == options.start_step + options.steps)) {
            point.valid_loss = dataset_loss(params, valid, options.batch_size, loss_fn);
            if (point.valid_loss < result.best_valid) {
                result.best_valid = point.valid_loss;
                result.best_step = step + 1;
                if (best_params) *best_params = params;
            }
        }
        result.curve.push_back(point);
        result.final_train_loss = loss;
        ++result.steps_run;
        if (options.stop_early && options.stop_early(step + 1, loss)) break;
    }
    if (best_params && result.best_step < 0) *best_params = params;
    return result;
}

}  // namespace

TrainResult pretrain_mlm(ModelParameters& params, const std::vector<TrainingExample>& train,
                         const std::vector<TrainingExample>& valid, const TrainOptions& options,
                         AdamState* adam, ModelParameters* best) {
    for (const auto& ex : train) {
        if (ex.mask_positions.empty()) {
            throw Error("pretrain dataset must carry mask positions");
        }
    }
    return run_training(params, train, valid, options, adam, best, &mlm_loss);
}

TrainResult finetune(ModelParameters& params, const std::vector<TrainingExample>& train,
                     const std::vector<TrainingExample>& valid, const TrainOptions& options,
                     AdamState* adam, ModelParameters* best) {
    for (const auto& ex : train) {
        if (ex.target_ids.empty()) throw Error("finetune dataset has an empty target");
    }
    return run_training(params, train, valid, options, adam, best, &seq2seq_loss);
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'V', 'G', 'K'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

void put_string(std::ostream& out, const std::string& s) {
    put<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    auto len = get<uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    return s;
}

void put_mat(std::ostream& out, const Mat& m) {
    put<uint64_t>(out, static_cast<uint64_t>(m.rows()));
    put<uint64_t>(out, static_cast<uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
}

Mat get_mat(std::istream& in) {
    auto rows = get<uint64_t>(in);
    auto cols = get<uint64_t>(in);
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    return m;
}

void put_config(std::ostream& out, const ModelConfig& c) {
    put<int32_t>(out, c.d_model);
    put<int32_t>(out, c.n_layers_enc);
    put<int32_t>(out, c.n_layers_dec);
    put<int32_t>(out, c.n_heads);
    put<int32_t>(out, c.d_ff);
    put<double>(out, c.dropout);
    put<int32_t>(out, c.max_in_len);
    put<int32_t>(out, c.max_out_len);
    put<double>(out, c.lr_pretrain);
    put<double>(out, c.lr_finetune);
    put<int32_t>(out, c.batch_pretrain);
    put<int32_t>(out, c.batch_finetune);
    put<double>(out, c.length_penalty);
    put<uint64_t>(out, c.seed);
    put<uint8_t>(out, c.tie_output ? 1 : 0);
}

ModelConfig get_config(std::istream& in) {
    ModelConfig c;
    c.d_model = get<int32_t>(in);
    c.n_layers_enc = get<int32_t>(in);
    c.n_layers_dec = get<int32_t>(in);
    c.n_heads = get<int32_t>(in);
    c.d_ff = get<int32_t>(in);
    c.dropout = get<double>(in);
    c.max_in_len = get<int32_t>(in);
    c.max_out_len = get<int32_t>(in);
    c.lr_pretrain = get<double>(in);
    c.lr_finetune = get<double>(in);
    c.batch_pretrain = get<int32_t>(in);
    c.batch_finetune = get<int32_t>(in);
    c.length_penalty = get<double>(in);
    c.seed = get<uint64_t>(in);
    c.tie_output = get<uint8_t>(in) != 0;
    return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     const Vocabulary& vocab, const AdamState* adam, int64_t step) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put_config(out, params.config);

    put<uint64_t>(out, vocab.size());
    for (const auto& t : vocab.tokens()) put_string(out, t);
    put<int64_t>(out, step);

    auto refs = params.collect();
    put<uint64_t>(out, refs.size());
    for (const auto& ref : refs) {
        put_string(out, ref.name);
        put_mat(out, ref.param->v);
    }

    put<uint8_t>(out, adam ? 1 : 0);
    if (adam) {
        put<int64_t>(out, adam->t);
        for (const auto& m : adam->m) put_mat(out, m);
        for (const auto& v : adam->v) put_mat(out, v);
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw SchemaError("not a checkpoint file");
    if (get<uint32_t>(in) != kVersion) throw SchemaError("unsupported checkpoint version");

    Checkpoint ck;
    ModelConfig config = get_config(in);

    auto vocab_count = get<uint64_t>(in);
    std::vector<std::string> tokens;
    tokens.reserve(vocab_count);
    for (uint64_t i = 0; i < vocab_count; ++i) tokens.push_back(get_string(in));
    ck.vocab = Vocabulary::from_tokens(std::move(tokens));
    ck.step = get<int64_t>(in);

    ck.params = ModelParameters::init(config, ck.vocab.size(), config.seed);
    auto refs = ck.params.collect();
    auto tensor_count = get<uint64_t>(in);
    if (tensor_count != refs.size()) throw SchemaError("checkpoint tensor count mismatch");
    for (auto& ref : refs) {
        std::string name = get_string(in);
        if (name != ref.name) throw SchemaError("checkpoint tensor order mismatch: " + name);
        Mat m = get_mat(in);
        if (m.rows() != ref.param->v.rows() || m.cols() != ref.param->v.cols()) {
            throw SchemaError("checkpoint tensor shape mismatch: " + name);
        }
        ref.param->v = std::move(m);
    }

    if (get<uint8_t>(in) != 0) {
        ck.adam.t = get<int64_t>(in);
        for (size_t i = 0; i < refs.size(); ++i) ck.adam.m.push_back(get_mat(in));
        for (size_t i = 0; i < refs.size(); ++i) ck.adam.v.push_back(get_mat(in));
    }
    if (!in) throw SchemaError("truncated checkpoint " + path.string());
    return ck;
}

void write_loss_curve_csv(const std::filesystem::path& path,
                          const std::vector<CurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step,train_loss,valid_loss\n";
    char buf[96];
    for (const auto& p : curve) {
        if (std::isnan(p.valid_loss)) {
            std::snprintf(buf, sizeof(buf), "%d,%.9f,\n", p.step, p.train_loss);
        } else {
            std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f\n", p.step, p.train_loss, p.valid_loss);
        }
        out << buf;
    }
}

}  // namespace revgen
