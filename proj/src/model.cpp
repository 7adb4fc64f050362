#include "fsp/model.hpp"

#include <algorithm>
#include <cmath>

#include "fsp/rng.hpp"

namespace fsp {

using nn::Mat;
using nn::Node;
using nn::Tape;

void ModelConfig::validate() const {
  if (vocab_size < 5) throw usage_error("vocab_size must cover the reserved ids");
  if (embed_dim < 1 || num_layers < 1 || num_heads < 1 || ffn_dim < 1 || max_input_len < 1 ||
      max_output_len < 0 || num_frame_classes < 1)
    throw usage_error("model config counts must be >= 1");
  if (embed_dim % num_heads != 0) throw usage_error("embed_dim must be divisible by num_heads");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw usage_error("dropout_rate must be in [0,1)");
}

ModelConfig toy_model_config() {
  ModelConfig c;
  c.embed_dim = 64;
  c.num_layers = 2;
  c.num_heads = 4;
  c.ffn_dim = 256;
  c.max_input_len = 96;
  c.max_output_len = 48;
  c.dropout_rate = 0.1;
  return c;
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.embed_dim = 16;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ffn_dim = 32;
  c.max_input_len = 64;
  c.max_output_len = 32;
  c.dropout_rate = 0.0;
  return c;
}

namespace {

void allocate(ModelParams& p) {
  const ModelConfig& c = p.config;
  const int d = c.embed_dim;
  auto attn = [d]() {
    detail::AttnT<Mat> a;
    a.wq = a.wk = a.wv = a.wo = Mat(d, d);
    a.bq = a.bk = a.bv = a.bo = Mat(1, d);
    return a;
  };
  auto ln = [d]() {
    detail::LayerNormT<Mat> l;
    l.gain = l.bias = Mat(1, d);
    return l;
  };
  auto ffn = [&]() {
    detail::FfnT<Mat> f;
    f.w1 = Mat(d, c.ffn_dim);
    f.b1 = Mat(1, c.ffn_dim);
    f.w2 = Mat(c.ffn_dim, d);
    f.b2 = Mat(1, d);
    return f;
  };
  p.token_embedding = Mat(c.vocab_size, d);
  p.pos_embedding_enc = Mat(c.max_input_len, d);
  p.pos_embedding_dec = Mat(c.max_output_len + 1, d);
  p.encoder.resize(static_cast<std::size_t>(c.num_layers));
  for (auto& layer : p.encoder) {
    layer.ln1 = ln();
    layer.attn = attn();
    layer.ln2 = ln();
    layer.ffn = ffn();
  }
  p.encoder_ln = ln();
  p.decoder.resize(static_cast<std::size_t>(c.num_layers));
  for (auto& layer : p.decoder) {
    layer.ln1 = ln();
    layer.self_attn = attn();
    layer.ln2 = ln();
    layer.cross_attn = attn();
    layer.ln3 = ln();
    layer.ffn = ffn();
  }
  p.decoder_ln = ln();
  p.output_w = Mat(d, c.vocab_size);
  p.output_b = Mat(1, c.vocab_size);
  p.classifier_w = Mat(d, c.num_frame_classes);
  p.classifier_b = Mat(1, c.num_frame_classes);
}

bool is_bias_name(const std::string& name) {
  const std::size_t dot = name.rfind('.');
  const std::string last = dot == std::string::npos ? name : name.substr(dot + 1);
  return last[0] == 'b' || name == "output_b" || name == "classifier_b";
}

}  // namespace

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  allocate(p);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  p.visit([&](const std::string& name, Mat& m) {
    if (name.size() >= 4 && name.compare(name.size() - 4, 4, "gain") == 0) {
      m.setOnes();
      return;
    }
    if (is_bias_name(name)) {
      m.setZero();
      return;
    }
    // zero-mean, variance scaled by layer width
    const double stddev = std::sqrt(2.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = stddev * unit(rng);
  });
  return p;
}

TensorList zeros_like(const ModelParams& params) {
  TensorList out;
  params.visit_const([&](const std::string&, const Mat& m) {
    out.push_back(Mat::Zero(m.rows(), m.cols()));
  });
  return out;
}

namespace {

struct ParamNodes : detail::ModelParamsT<Node*> {};

struct BoundParams {
  ParamNodes nodes;
  std::vector<Node*> leaves;  // visit order, aligned with TensorList
};

BoundParams bind(Tape& tape, const ModelParams& params, bool needs_grad) {
  BoundParams bound;
  params.visit_const([&](const std::string&, const Mat& m) {
    bound.leaves.push_back(tape.leaf(m, needs_grad));
  });
  bound.nodes.encoder.resize(params.encoder.size());
  bound.nodes.decoder.resize(params.decoder.size());
  std::size_t i = 0;
  bound.nodes.visit([&](const std::string&, Node*& n) { n = bound.leaves[i++]; });
  return bound;
}

void accumulate(const BoundParams& bound, TensorList& grads, double scale) {
  for (std::size_t i = 0; i < bound.leaves.size(); ++i)
    grads[i] += bound.leaves[i]->grad * scale;
}

Node* maybe_dropout(Tape& t, Node* x, DropoutCtx* drop) {
  if (drop == nullptr || drop->rate <= 0.0) return x;
  return t.dropout(x, drop->rate, drop->rng);
}

Node* attention_block(Tape& t, detail::AttnT<Node*>& p, Node* x_q, Node* x_kv, int heads,
                      bool causal) {
  Node* q = t.add_row(t.matmul(x_q, p.wq), p.bq);
  Node* k = t.add_row(t.matmul(x_kv, p.wk), p.bk);
  Node* v = t.add_row(t.matmul(x_kv, p.wv), p.bv);
  Node* o = t.attention(q, k, v, heads, causal);
  return t.add_row(t.matmul(o, p.wo), p.bo);
}

Node* ffn_block(Tape& t, detail::FfnT<Node*>& p, Node* x) {
  Node* h = t.gelu(t.add_row(t.matmul(x, p.w1), p.b1));
  return t.add_row(t.matmul(h, p.w2), p.b2);
}

Node* ln_block(Tape& t, detail::LayerNormT<Node*>& p, Node* x) {
  return t.layer_norm(x, p.gain, p.bias);
}

std::vector<int> iota_rows(int n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

Node* embed(Tape& t, ParamNodes& pn, Node* pos_table, const std::vector<int>& ids,
            DropoutCtx* drop) {
  Node* tok = t.gather_rows(pn.token_embedding, ids);
  Node* pos = t.gather_rows(pos_table, iota_rows(static_cast<int>(ids.size())));
  return maybe_dropout(t, t.add(tok, pos), drop);
}

Node* encoder_graph(Tape& t, ParamNodes& pn, const ModelConfig& cfg,
                    const std::vector<int>& ids, DropoutCtx* drop) {
  if (ids.empty()) throw data_error("encoder input is empty");
  if (static_cast<int>(ids.size()) > cfg.max_input_len)
    throw data_error("encoder input length " + std::to_string(ids.size()) +
                     " exceeds max_input_len " + std::to_string(cfg.max_input_len));
  Node* x = embed(t, pn, pn.pos_embedding_enc, ids, drop);
  for (auto& layer : pn.encoder) {
    Node* normed = ln_block(t, layer.ln1, x);
    x = t.add(x, maybe_dropout(t, attention_block(t, layer.attn, normed, normed, cfg.num_heads,
                                                  /*causal=*/false),
                               drop));
    x = t.add(x, maybe_dropout(t, ffn_block(t, layer.ffn, ln_block(t, layer.ln2, x)), drop));
  }
  return ln_block(t, pn.encoder_ln, x);
}

Node* decoder_graph(Tape& t, ParamNodes& pn, const ModelConfig& cfg, Node* enc,
                    const std::vector<int>& dec_input_ids, DropoutCtx* drop) {
  if (static_cast<int>(dec_input_ids.size()) > cfg.max_output_len + 1)
    throw data_error("decoder input exceeds max_output_len");
  Node* x = embed(t, pn, pn.pos_embedding_dec, dec_input_ids, drop);
  for (auto& layer : pn.decoder) {
    Node* normed = ln_block(t, layer.ln1, x);
    x = t.add(x, maybe_dropout(t, attention_block(t, layer.self_attn, normed, normed,
                                                  cfg.num_heads, /*causal=*/true),
                               drop));
    x = t.add(x, maybe_dropout(t, attention_block(t, layer.cross_attn,
                                                  ln_block(t, layer.ln2, x), enc,
                                                  cfg.num_heads, /*causal=*/false),
                               drop));
    x = t.add(x, maybe_dropout(t, ffn_block(t, layer.ffn, ln_block(t, layer.ln3, x)), drop));
  }
  x = ln_block(t, pn.decoder_ln, x);
  return t.add_row(t.matmul(x, pn.output_w), pn.output_b);
}

Node* classifier_logits_graph(Tape& t, ParamNodes& pn, const ModelConfig& cfg, Node* enc,
                              const std::vector<int>& trigger_positions) {
  std::vector<int> rows = cfg.pooling == PoolingMode::FullMean
                              ? iota_rows(static_cast<int>(enc->val().rows()))
                              : trigger_positions;
  if (rows.empty()) throw data_error("classifier pooling needs at least one position");
  for (int r : rows) {
    if (r < 0 || r >= enc->val().rows())
      throw data_error("trigger position " + std::to_string(r) + " outside encoder output");
  }
  Node* pooled = t.mean_rows(enc, rows);
  return t.add_row(t.matmul(pooled, pn.classifier_w), pn.classifier_b);
}

}  // namespace

EncoderOutput encode(const ModelParams& params, const std::vector<int>& input_ids) {
  Tape tape;
  BoundParams bound = bind(tape, params, /*needs_grad=*/false);
  Node* enc = encoder_graph(tape, bound.nodes, params.config, input_ids, nullptr);
  return enc->val();
}

Eigen::VectorXd classify_frame(const ModelParams& params, const EncoderOutput& enc,
                               const std::vector<int>& trigger_positions) {
  const ModelConfig& cfg = params.config;
  std::vector<int> rows = cfg.pooling == PoolingMode::FullMean
                              ? iota_rows(static_cast<int>(enc.rows()))
                              : trigger_positions;
  if (rows.empty()) throw data_error("classifier pooling needs at least one position");
  Eigen::RowVectorXd pooled = Eigen::RowVectorXd::Zero(enc.cols());
  for (int r : rows) {
    if (r < 0 || r >= enc.rows()) throw data_error("trigger position outside encoder output");
    pooled += enc.row(r);
  }
  pooled /= static_cast<double>(rows.size());
  Mat logits = pooled * params.classifier_w + params.classifier_b;
  return nn::softmax_rows(logits).row(0).transpose();
}

nn::Mat decoder_logits(const ModelParams& params, const EncoderOutput& enc,
                       const std::vector<int>& decoder_input_ids) {
  Tape tape;
  BoundParams bound = bind(tape, params, /*needs_grad=*/false);
  Node* enc_node = tape.constant(enc);
  Node* logits = decoder_graph(tape, bound.nodes, params.config, enc_node, decoder_input_ids,
                               nullptr);
  return logits->val();
}

std::vector<int> decode_greedy(const ModelParams& params, const EncoderOutput& enc,
                               int max_output_len) {
  constexpr int kBos = 1, kEos = 2;
  std::vector<int> prefix = {kBos};
  std::vector<int> out;
  for (int step = 0; step < max_output_len; ++step) {
    Mat logits = decoder_logits(params, enc, prefix);
    Eigen::Index next;
    logits.row(logits.rows() - 1).maxCoeff(&next);
    if (static_cast<int>(next) == kEos) break;
    out.push_back(static_cast<int>(next));
    prefix.push_back(static_cast<int>(next));
  }
  return out;
}

double seq_loss(const ModelParams& params, const std::vector<int>& input_ids,
                const std::vector<int>& target_ids, TensorList* grads, double grad_scale,
                DropoutCtx* dropout, bool allow_empty_target) {
  constexpr int kBos = 1, kEos = 2;
  if (target_ids.empty() && !allow_empty_target) throw data_error("empty target sequence");
  std::vector<int> dec_input = {kBos};
  dec_input.insert(dec_input.end(), target_ids.begin(), target_ids.end());
  std::vector<int> labels = target_ids;
  labels.push_back(kEos);

  Tape tape;
  BoundParams bound = bind(tape, params, grads != nullptr);
  Node* enc = encoder_graph(tape, bound.nodes, params.config, input_ids, dropout);
  Node* logits = decoder_graph(tape, bound.nodes, params.config, enc, dec_input, dropout);
  Node* loss = tape.softmax_cross_entropy(logits, labels);
  const double value = loss->val()(0, 0);
  if (grads != nullptr) {
    tape.backward(loss);
    accumulate(bound, *grads, grad_scale);
  }
  return value;
}

double class_loss(const ModelParams& params, const std::vector<int>& input_ids,
                  const std::vector<int>& trigger_positions, int gold_class, TensorList* grads,
                  double grad_scale, DropoutCtx* dropout) {
  if (gold_class < 0 || gold_class >= params.config.num_frame_classes)
    throw data_error("gold class out of range");
  Tape tape;
  BoundParams bound = bind(tape, params, grads != nullptr);
  Node* enc = encoder_graph(tape, bound.nodes, params.config, input_ids, dropout);
  Node* logits = classifier_logits_graph(tape, bound.nodes, params.config, enc,
                                         trigger_positions);
  Node* loss = tape.softmax_cross_entropy(logits, {gold_class});
  const double value = loss->val()(0, 0);
  if (grads != nullptr) {
    tape.backward(loss);
    accumulate(bound, *grads, grad_scale);
  }
  return value;
}

GradCheckReport grad_check(const ModelConfig& config, const std::vector<int>& input_ids,
                           const std::vector<int>& target_ids,
                           const std::vector<int>& trigger_positions, int gold_class,
                           double epsilon, int sample_size, std::uint64_t seed) {
  ModelParams params = init_params(config);

  std::vector<Mat*> tensors;
  params.visit([&](const std::string&, Mat& m) { tensors.push_back(&m); });

  struct Path {
    std::function<double(TensorList*)> loss;
    double* max_err;
  };
  GradCheckReport report;
  Path seq_path{[&](TensorList* g) {
                  return seq_loss(params, input_ids, target_ids, g, 1.0, nullptr);
                },
                &report.max_rel_error_seq};
  Path class_path{[&](TensorList* g) {
                    return class_loss(params, input_ids, trigger_positions, gold_class, g, 1.0,
                                      nullptr);
                  },
                  &report.max_rel_error_class};

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (Path* path : {&seq_path, &class_path}) {
    TensorList analytic = zeros_like(params);
    path->loss(&analytic);
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      Mat& m = *tensors[t];
      for (int s = 0; s < sample_size; ++s) {
        const Eigen::Index r = static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(m.rows())));
        const Eigen::Index c = static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(m.cols())));
        const double saved = m(r, c);
        m(r, c) = saved + epsilon;
        const double lp = path->loss(nullptr);
        m(r, c) = saved - epsilon;
        const double lm = path->loss(nullptr);
        m(r, c) = saved;
        const double numeric = (lp - lm) / (2.0 * epsilon);
        const double a = analytic[t](r, c);
        const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
        if (err > *path->max_err) *path->max_err = err;
      }
    }
  }
  return report;
}

}  // namespace fsp
