#ifndef FSP_MODEL_HPP
#define FSP_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fsp/autograd.hpp"
#include "fsp/errors.hpp"

namespace fsp {

/// Which encoder positions feed the frame classifier.
enum class PoolingMode { TriggerMean, FullMean };

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 64;
  int num_layers = 2;  // encoder and decoder depth
  int num_heads = 4;
  int ffn_dim = 256;
  int max_input_len = 96;
  int max_output_len = 48;
  int num_frame_classes = 1;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;
  PoolingMode pooling = PoolingMode::TriggerMean;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Toy defaults that train in minutes on one CPU core.
ModelConfig toy_model_config();
/// Very small config for gradient checks and overfit runs.
ModelConfig tiny_model_config();

namespace detail {

template <class T>
struct AttnT {
  T wq, wk, wv, wo, bq, bk, bv, bo;
  template <class F>
  void visit(const std::string& p, F&& f) {
    f(p + ".wq", wq); f(p + ".wk", wk); f(p + ".wv", wv); f(p + ".wo", wo);
    f(p + ".bq", bq); f(p + ".bk", bk); f(p + ".bv", bv); f(p + ".bo", bo);
  }
};

template <class T>
struct LayerNormT {
  T gain, bias;
  template <class F>
  void visit(const std::string& p, F&& f) {
    f(p + ".gain", gain);
    f(p + ".bias", bias);
  }
};

template <class T>
struct FfnT {
  T w1, b1, w2, b2;
  template <class F>
  void visit(const std::string& p, F&& f) {
    f(p + ".w1", w1); f(p + ".b1", b1); f(p + ".w2", w2); f(p + ".b2", b2);
  }
};

template <class T>
struct EncoderLayerT {
  LayerNormT<T> ln1;
  AttnT<T> attn;
  LayerNormT<T> ln2;
  FfnT<T> ffn;
  template <class F>
  void visit(const std::string& p, F&& f) {
    ln1.visit(p + ".ln1", f);
    attn.visit(p + ".attn", f);
    ln2.visit(p + ".ln2", f);
    ffn.visit(p + ".ffn", f);
  }
};

template <class T>
struct DecoderLayerT {
  LayerNormT<T> ln1;
  AttnT<T> self_attn;
  LayerNormT<T> ln2;
  AttnT<T> cross_attn;
  LayerNormT<T> ln3;
  FfnT<T> ffn;
  template <class F>
  void visit(const std::string& p, F&& f) {
    ln1.visit(p + ".ln1", f);
    self_attn.visit(p + ".self", f);
    ln2.visit(p + ".ln2", f);
    cross_attn.visit(p + ".cross", f);
    ln3.visit(p + ".ln3", f);
    ffn.visit(p + ".ffn", f);
  }
};

template <class T>
struct ModelParamsT {
  T token_embedding;   // vocab x d
  T pos_embedding_enc; // max_input_len x d
  T pos_embedding_dec; // (max_output_len + 1) x d, +1 for BOS
  std::vector<EncoderLayerT<T>> encoder;
  LayerNormT<T> encoder_ln;
  std::vector<DecoderLayerT<T>> decoder;
  LayerNormT<T> decoder_ln;
  T output_w, output_b;         // d x V, 1 x V
  T classifier_w, classifier_b; // d x C, 1 x C

  template <class F>
  void visit(F&& f) {
    f("token_embedding", token_embedding);
    f("pos_embedding_enc", pos_embedding_enc);
    f("pos_embedding_dec", pos_embedding_dec);
    for (std::size_t i = 0; i < encoder.size(); ++i)
      encoder[i].visit("enc" + std::to_string(i), f);
    encoder_ln.visit("enc_ln", f);
    for (std::size_t i = 0; i < decoder.size(); ++i)
      decoder[i].visit("dec" + std::to_string(i), f);
    decoder_ln.visit("dec_ln", f);
    f("output_w", output_w);
    f("output_b", output_b);
    f("classifier_w", classifier_w);
    f("classifier_b", classifier_b);
  }
};

}  // namespace detail

struct ModelParams : detail::ModelParamsT<nn::Mat> {
  ModelConfig config;

  template <class F>
  void visit_const(F&& f) const {
    const_cast<ModelParams*>(this)->visit(
        [&f](const std::string& name, const nn::Mat& m) { f(name, m); });
  }
};

/// Deterministic in config.seed; width-scaled zero-mean weights,
/// layer-norm gains 1 and biases 0.
ModelParams init_params(const ModelConfig& config);

/// Grad / optimizer-state storage aligned with the visit order.
using TensorList = std::vector<nn::Mat>;
TensorList zeros_like(const ModelParams& params);

/// Per-position contextual vectors, input_len x embed_dim.
using EncoderOutput = nn::Mat;

/// Evaluation-mode (no dropout) forward passes.
EncoderOutput encode(const ModelParams& params, const std::vector<int>& input_ids);
/// Softmax distribution over frame classes from pooled encoder states.
Eigen::VectorXd classify_frame(const ModelParams& params, const EncoderOutput& enc,
                               const std::vector<int>& trigger_positions);
/// Greedy argmax decoding; returns emitted ids without BOS/EOS.
std::vector<int> decode_greedy(const ModelParams& params, const EncoderOutput& enc,
                               int max_output_len);

/// Training-mode dropout stream; null pointer means evaluation mode.
struct DropoutCtx {
  double rate = 0.0;
  std::mt19937_64 rng;
};

/// Teacher-forced mean NLL over target tokens plus EOS. When `grads` is
/// non-null, accumulates d(loss)/d(param) * grad_scale into it.
double seq_loss(const ModelParams& params, const std::vector<int>& input_ids,
                const std::vector<int>& target_ids, TensorList* grads, double grad_scale,
                DropoutCtx* dropout, bool allow_empty_target = false);

/// -log p(gold class); encoder + classifier head gradients.
double class_loss(const ModelParams& params, const std::vector<int>& input_ids,
                  const std::vector<int>& trigger_positions, int gold_class, TensorList* grads,
                  double grad_scale, DropoutCtx* dropout);

/// Full decoder logits (rows = positions) for a given decoder input;
/// used by causality tests and greedy decoding.
nn::Mat decoder_logits(const ModelParams& params, const EncoderOutput& enc,
                       const std::vector<int>& decoder_input_ids);

struct GradCheckReport {
  double max_rel_error_seq = 0.0;
  double max_rel_error_class = 0.0;
  double max_rel_error() const {
    return max_rel_error_seq > max_rel_error_class ? max_rel_error_seq : max_rel_error_class;
  }
};

/// Central finite differences against analytic gradients on sampled
/// coordinates of every tensor, both loss paths, dropout disabled.
GradCheckReport grad_check(const ModelConfig& config, const std::vector<int>& input_ids,
                           const std::vector<int>& target_ids,
                           const std::vector<int>& trigger_positions, int gold_class,
                           double epsilon, int sample_size, std::uint64_t seed);

}  // namespace fsp

#endif
