#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "revgen/rng.hpp"
#include "revgen/vocab.hpp"

namespace revgen {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
    int d_model = 128;
    int n_layers_enc = 2;
    int n_layers_dec = 2;
    int n_heads = 4;
    int d_ff = 256;
    double dropout = 0.1;
    int max_in_len = 128;   // 256 for pre-training by default
    int max_out_len = 128;
    double lr_pretrain = 1e-4;
    double lr_finetune = 1e-3;
    int batch_pretrain = 16;
    int batch_finetune = 32;
    double length_penalty = 1.0;
    uint64_t seed = 0;
    bool tie_output = false;

    void validate() const;  // throws Error on bad values
};

// Named parameter with its gradient buffer.
struct Param {
    Mat v;
    Mat g;
    void init_zero(Eigen::Index rows, Eigen::Index cols) {
        v = Mat::Zero(rows, cols);
        g = Mat::Zero(rows, cols);
    }
};

struct ParamRef {
    std::string name;
    Param* param;
};

struct LayerNormWeights {
    Param gain, bias;
};

struct AttentionWeights {
    Param wq, wk, wv, wo;
};

struct FeedForwardWeights {
    Param w1, b1, w2, b2;
};

struct EncoderLayerWeights {
    LayerNormWeights ln1, ln2;
    AttentionWeights attn;
    FeedForwardWeights ff;
};

struct DecoderLayerWeights {
    LayerNormWeights ln1, ln2, ln3;
    AttentionWeights self_attn, cross_attn;
    FeedForwardWeights ff;
};

struct ModelParameters {
    ModelConfig config;
    size_t vocab_size = 0;

    Param embedding;  // |V| x d
    std::vector<EncoderLayerWeights> enc;
    std::vector<DecoderLayerWeights> dec;
    LayerNormWeights enc_final_ln, dec_final_ln;
    Param out_proj;  // d x |V| (absent when tied)
    Param out_bias;  // 1 x |V|
    Param mlm_w;     // d x |V|
    Param mlm_b;     // 1 x |V|

    static ModelParameters init(const ModelConfig& config, size_t vocab_size, uint64_t seed);

    std::vector<ParamRef> collect();
    std::vector<ParamRef> collect() const;  // const-cast helper for serialization
    void zero_grads();
    size_t total_params() const;
    bool all_finite() const;
};

struct TrainingExample {
    std::vector<int> input_ids;
    std::vector<int> target_ids;
    std::vector<int> mask_positions;  // pre-training only
};

struct MaskResult {
    std::vector<int> masked_ids;
    std::vector<int> positions;
    std::vector<int> original_ids;
};

// Replaces max(1, round(rate*n_maskable)) non-special, non-prefix positions
// with <mask>. Throws NothingMaskableError when every position is protected.
MaskResult mask_tokens(const std::vector<int>& ids, double rate, uint64_t seed,
                       size_t protected_prefix_len = 0);

// Numerically stable softmax (max subtraction).
std::vector<double> softmax(const std::vector<double>& logits);

// --- loss evaluation -------------------------------------------------------

// Mean masked-token cross-entropy over the batch. Accumulates parameter
// gradients when with_grads; dropout active only when dropout_rng given.
double mlm_loss(ModelParameters& params, const std::vector<const TrainingExample*>& batch,
                bool with_grads, Rng* dropout_rng);

// Teacher-forced cross-entropy over non-pad target positions.
double seq2seq_loss(ModelParameters& params, const std::vector<const TrainingExample*>& batch,
                    bool with_grads, Rng* dropout_rng);

// Decoder logits over the vocabulary for each target position (inference).
Mat decoder_logits(const ModelParameters& params, const std::vector<int>& input_ids,
                   const std::vector<int>& decoder_input_ids);

// Same, reusing an already-computed encoder output.
Mat decoder_logits_cached(const ModelParameters& params, const Mat& enc_out,
                          const std::vector<int>& decoder_input_ids);

// Encoder hidden states (inference); used by decode and tests.
Mat encode_sequence(const ModelParameters& params, const std::vector<int>& input_ids);

// --- optimization ----------------------------------------------------------

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<Mat> m, v;  // parallel to collect() order

    static AdamState init_for(ModelParameters& params);
};

// One update with global-norm clipping; grads read from Param::g.
void adam_step(ModelParameters& params, AdamState& state, double lr, double clip_norm);

struct TrainOptions {
    int steps = 2000;
    int eval_every = 200;
    double lr = 1e-4;
    int batch_size = 16;
    uint64_t seed = 0;
    double clip_norm = 1.0;
    bool dropout_enabled = true;
    int start_step = 0;  // resume offset; data order is a function of the step
    // optional early stop, called after each step
    std::function<bool(int step, double train_loss)> stop_early;
};

struct CurvePoint {
    int step = 0;
    double train_loss = 0.0;
    double valid_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    int steps_run = 0;
    double final_train_loss = 0.0;
    double best_valid = std::numeric_limits<double>::infinity();
    int best_step = -1;
};

// Masked-LM pre-training (best-validation snapshot kept in *best_params
// when given). Throws NonFiniteLossError with a diagnostic on divergence.
TrainResult pretrain_mlm(ModelParameters& params, const std::vector<TrainingExample>& train,
                         const std::vector<TrainingExample>& valid, const TrainOptions& options,
                         AdamState* adam = nullptr, ModelParameters* best_params = nullptr);

// Fine-tuning on (tagged function -> comment) pairs; same loop contract.
TrainResult finetune(ModelParameters& params, const std::vector<TrainingExample>& train,
                     const std::vector<TrainingExample>& valid, const TrainOptions& options,
                     AdamState* adam = nullptr, ModelParameters* best_params = nullptr);

// --- checkpointing ---------------------------------------------------------

struct Checkpoint {
    ModelParameters params;
    Vocabulary vocab;
    AdamState adam;
    int64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     const Vocabulary& vocab, const AdamState* adam, int64_t step);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_loss_curve_csv(const std::filesystem::path& path,
                          const std::vector<CurvePoint>& curve);

}  // namespace revgen
