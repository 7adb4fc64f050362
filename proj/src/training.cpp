#include "fsp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fsp/rng.hpp"

namespace fsp {

using ojson = nlohmann::ordered_json;

std::string train_mode_name(TrainMode mode) {
  return mode == TrainMode::FullGen ? "fullgen" : "multitask";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "fullgen") return TrainMode::FullGen;
  if (name == "multitask") return TrainMode::MultiTask;
  throw usage_error("unknown training mode '" + name + "' (expected fullgen or multitask)");
}

std::vector<EncodedExample> encode_for_training(const Corpus& corpus, const Vocabulary& vocab,
                                                TrainMode mode) {
  std::vector<EncodedExample> out;
  out.reserve(corpus.examples.size() * (mode == TrainMode::MultiTask ? 2 : 1));
  for (const AnnotatedExample& ex : corpus.examples) {
    if (mode == TrainMode::FullGen) {
      TaskExample task = fullgen_encode(ex);
      EncodedExample enc;
      enc.kind = TaskKind::FullGen;
      enc.input_ids = vocab.encode(task.input_text);
      enc.target_ids = vocab.encode(task.target_text);
      out.push_back(std::move(enc));
    } else {
      auto [frame_task, args_task] = multitask_encode(ex);
      EncodedExample fr;
      fr.kind = TaskKind::Frame;
      fr.input_ids = vocab.encode(frame_task.input_text);
      fr.trigger_positions = trigger_positions_in_input(frame_task.input_text);
      fr.gold_class = corpus.ontology.frame_index(ex.frame);
      out.push_back(std::move(fr));

      EncodedExample ar;
      ar.kind = TaskKind::Args;
      ar.input_ids = vocab.encode(args_task.input_text);
      ar.target_ids = vocab.encode(args_task.target_text);
      out.push_back(std::move(ar));
    }
  }
  return out;
}

std::vector<TaskBatch> make_batches(const std::vector<EncodedExample>& examples, int batch_size,
                                    std::uint64_t seed) {
  if (batch_size < 1) throw usage_error("batch_size must be >= 1");
  if (examples.empty()) throw usage_error("make_batches needs at least one example");

  std::map<TaskKind, std::vector<std::size_t>> by_task;
  for (std::size_t i = 0; i < examples.size(); ++i) by_task[examples[i].kind].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<TaskBatch>> queues;  // per task, in chunk order
  for (auto& [kind, indices] : by_task) {
    shuffle_vec(indices, rng);
    std::vector<TaskBatch> chunks;
    for (std::size_t off = 0; off < indices.size(); off += static_cast<std::size_t>(batch_size)) {
      TaskBatch b;
      b.kind = kind;
      const std::size_t end = std::min(indices.size(), off + static_cast<std::size_t>(batch_size));
      b.indices.assign(indices.begin() + static_cast<std::ptrdiff_t>(off),
                       indices.begin() + static_cast<std::ptrdiff_t>(end));
      chunks.push_back(std::move(b));
    }
    queues.push_back(std::move(chunks));
  }

  std::vector<TaskBatch> out;
  std::vector<std::size_t> heads(queues.size(), 0);
  auto remaining = [&](std::size_t q) { return heads[q] < queues[q].size(); };
  while (true) {
    std::vector<std::size_t> live;
    for (std::size_t q = 0; q < queues.size(); ++q)
      if (remaining(q)) live.push_back(q);
    if (live.empty()) break;
    const std::size_t pick =
        live[static_cast<std::size_t>(uniform_below(rng, static_cast<std::uint64_t>(live.size())))];
    out.push_back(std::move(queues[pick][heads[pick]++]));
  }
  return out;
}

LossBalancer::LossBalancer(double decay, int warmup_steps)
    : decay_(decay), warmup_steps_(warmup_steps) {
  if (decay <= 0.0 || decay >= 1.0) throw usage_error("balancer decay must be in (0,1)");
  if (warmup_steps < 0) throw usage_error("warmup_steps must be >= 0");
}

double LossBalancer::update(TaskKind kind, double raw_loss) {
  if (!std::isfinite(raw_loss)) throw numeric_error("non-finite task loss");
  if (raw_loss < 0.0) throw numeric_error("negative task loss");
  auto it = ema_.find(kind);
  if (it == ema_.end()) {
    ema_.emplace(kind, raw_loss);
  } else {
    it->second = decay_ * it->second + (1.0 - decay_) * raw_loss;
  }
  ++steps_;
  return weight(kind);
}

double LossBalancer::ema(TaskKind kind) const {
  auto it = ema_.find(kind);
  if (it == ema_.end()) throw usage_error("no observations for task " + task_kind_name(kind));
  return it->second;
}

double LossBalancer::weight(TaskKind kind) const {
  if (steps_ <= warmup_steps_) return 1.0;
  auto it = ema_.find(kind);
  if (it == ema_.end()) return 1.0;
  double mean = 0.0;
  for (const auto& [k, e] : ema_) mean += e;
  mean /= static_cast<double>(ema_.size());
  if (it->second <= 0.0) return 1.0;
  return std::clamp(mean / it->second, 0.1, 10.0);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw usage_error("epochs must be >= 0");
  if (learning_rate <= 0.0) throw usage_error("learning_rate must be > 0");
  if (batch_size < 1) throw usage_error("batch_size must be >= 1");
  if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0)
    throw usage_error("adam betas must be in (0,1)");
  if (adam_eps <= 0.0) throw usage_error("adam_eps must be > 0");
  if (balancer_decay <= 0.0 || balancer_decay >= 1.0)
    throw usage_error("balancer_decay must be in (0,1)");
  if (warmup_steps < 0) throw usage_error("warmup_steps must be >= 0");
}

AdamState init_adam(const ModelParams& params) {
  AdamState state;
  state.m = zeros_like(params);
  state.v = zeros_like(params);
  return state;
}

void adam_step(ModelParams& params, const TensorList& grads, AdamState& state,
               const TrainConfig& config, double scale) {
  ++state.t;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  std::size_t i = 0;
  params.visit([&](const std::string&, nn::Mat& p) {
    const nn::Mat g = grads[i] * scale;
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g.cwiseProduct(g);
    const nn::Mat m_hat = state.m[i] / corr1;
    const nn::Mat v_hat = state.v[i] / corr2;
    p.array() -= config.learning_rate * m_hat.array() / (v_hat.array().sqrt() + config.adam_eps);
    ++i;
  });
}

namespace {

double example_loss(const ModelParams& params, const EncodedExample& ex, TensorList* grads,
                    double grad_scale, DropoutCtx* drop) {
  if (ex.kind == TaskKind::Frame)
    return class_loss(params, ex.input_ids, ex.trigger_positions, ex.gold_class, grads,
                      grad_scale, drop);
  // zero-role ARGS targets are legitimately empty: the model learns to
  // emit EOS immediately
  return seq_loss(params, ex.input_ids, ex.target_ids, grads, grad_scale, drop,
                  /*allow_empty_target=*/true);
}

/// Greedy decode stopped at the first "|" (end of the frame segment).
std::string fullgen_frame_prefix(const ModelParams& params, const Vocabulary& vocab,
                                 const EncoderOutput& enc) {
  const int stop = vocab.id("|");
  std::vector<int> prefix = {Vocabulary::kBos};
  std::vector<int> emitted;
  for (int step = 0; step < 12; ++step) {
    nn::Mat logits = decoder_logits(params, enc, prefix);
    Eigen::Index next;
    logits.row(logits.rows() - 1).maxCoeff(&next);
    const int id = static_cast<int>(next);
    if (id == Vocabulary::kEos || id == stop) break;
    emitted.push_back(id);
    prefix.push_back(id);
  }
  return vocab.decode(emitted);
}

}  // namespace

double dev_frame_accuracy(const ModelParams& params, const Vocabulary& vocab,
                          const Corpus& dev, TrainMode mode) {
  if (dev.examples.empty()) throw usage_error("dev split is empty");
  std::size_t correct = 0;
  for (const AnnotatedExample& ex : dev.examples) {
    if (mode == TrainMode::MultiTask) {
      const std::string input = frame_task_input(ex);
      EncoderOutput enc = encode(params, vocab.encode(input));
      Eigen::VectorXd probs = classify_frame(params, enc, trigger_positions_in_input(input));
      Eigen::Index argmax;
      probs.maxCoeff(&argmax);
      if (static_cast<int>(argmax) == dev.ontology.frame_index(ex.frame)) ++correct;
    } else {
      TaskExample task = fullgen_encode(ex);
      EncoderOutput enc = encode(params, vocab.encode(task.input_text));
      const std::string prefix = fullgen_frame_prefix(params, vocab, enc);
      const std::size_t eq = prefix.find(" = ");
      if (eq != std::string::npos && prefix.substr(eq + 3) == ex.frame) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dev.examples.size());
}

TrainResult train(const Corpus& train_split, const Corpus* dev_split, TrainMode mode,
                  ModelConfig model_config, const TrainConfig& train_config,
                  const Vocabulary& vocab, std::vector<EpochStats>* progress_sink) {
  train_config.validate();
  if (train_split.examples.empty()) throw usage_error("training split is empty");

  model_config.vocab_size = vocab.size();
  model_config.num_frame_classes =
      std::max<int>(1, static_cast<int>(train_split.ontology.frames.size()));

  TrainResult result;
  result.params = init_params(model_config);

  const std::vector<EncodedExample> dataset = encode_for_training(train_split, vocab, mode);

  AdamState adam = init_adam(result.params);
  LossBalancer balancer(train_config.balancer_decay, train_config.warmup_steps);
  TensorList grads = zeros_like(result.params);
  DropoutCtx drop{model_config.dropout_rate, std::mt19937_64(train_config.seed ^ 0x5d15d11ULL)};

  TensorList last_good;
  auto snapshot = [&]() {
    last_good.clear();
    result.params.visit_const(
        [&](const std::string&, const nn::Mat& m) { last_good.push_back(m); });
  };
  auto restore = [&]() {
    std::size_t i = 0;
    result.params.visit([&](const std::string&, nn::Mat& m) { m = last_good[i++]; });
  };
  snapshot();

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    const std::vector<TaskBatch> batches =
        make_batches(dataset, train_config.batch_size,
                     train_config.seed + 0x9e37ULL * static_cast<std::uint64_t>(epoch + 1));
    std::map<std::string, double> loss_sum;
    std::map<std::string, int> loss_count;
    std::map<std::string, double> last_weight;

    for (const TaskBatch& batch : batches) {
      for (nn::Mat& g : grads) g.setZero();
      double raw = 0.0;
      const double per_example = 1.0 / static_cast<double>(batch.indices.size());
      for (std::size_t idx : batch.indices) {
        DropoutCtx* d = model_config.dropout_rate > 0.0 ? &drop : nullptr;
        raw += per_example * example_loss(result.params, dataset[idx], &grads, per_example, d);
      }
      if (!std::isfinite(raw)) {
        restore();
        result.diverged = true;
        return result;
      }
      const double weight = balancer.update(batch.kind, raw);
      adam_step(result.params, grads, adam, train_config, weight);

      const std::string name = task_kind_name(batch.kind);
      loss_sum[name] += raw;
      loss_count[name] += 1;
      last_weight[name] = weight;
    }

    EpochStats stats;
    stats.epoch = epoch;
    for (const auto& [name, sum] : loss_sum) stats.task_loss[name] = sum / loss_count[name];
    stats.task_weight = last_weight;
    if (dev_split != nullptr && !dev_split->examples.empty())
      stats.dev_frame_accuracy = dev_frame_accuracy(result.params, vocab, *dev_split, mode);
    result.history.push_back(stats);
    if (progress_sink != nullptr) progress_sink->push_back(stats);
    snapshot();
  }
  return result;
}

// ---- Checkpoints

namespace {
constexpr char kMagic[8] = {'F', 'S', 'P', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const std::string& path, const ModelParams& params, TrainMode mode,
                     const Vocabulary& vocab, const std::vector<std::string>& frame_labels) {
  ojson header;
  const ModelConfig& c = params.config;
  header["model"] = {{"vocab_size", c.vocab_size},
                     {"embed_dim", c.embed_dim},
                     {"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},
                     {"ffn_dim", c.ffn_dim},
                     {"max_input_len", c.max_input_len},
                     {"max_output_len", c.max_output_len},
                     {"num_frame_classes", c.num_frame_classes},
                     {"dropout_rate", c.dropout_rate},
                     {"seed", c.seed},
                     {"pooling", c.pooling == PoolingMode::FullMean ? "full_mean" : "trigger_mean"}};
  header["mode"] = train_mode_name(mode);
  header["vocab"] = vocab.tokens();
  header["vocab_hash"] = vocab.hash();
  header["frames"] = frame_labels;
  ojson tensors = ojson::array();
  params.visit_const([&](const std::string& name, const nn::Mat& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  header["tensors"] = std::move(tensors);
  const std::string header_text = header.dump();

  const std::filesystem::path tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw data_error("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = header_text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    params.visit_const([&](const std::string&, const nn::Mat& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index cc = 0; cc < m.cols(); ++cc) {
          const double v = m(r, cc);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    });
    if (!out) throw data_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw data_error(path + ": not a checkpoint file (bad magic)");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw data_error(path + ": truncated checkpoint header");
  std::string header_text(len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(len));
  if (!in) throw data_error(path + ": truncated checkpoint header");

  ojson header;
  try {
    header = ojson::parse(header_text);
  } catch (const ojson::exception& e) {
    throw data_error(path + ": corrupt checkpoint header: " + e.what());
  }

  Checkpoint ckpt;
  try {
    const ojson& m = header.at("model");
    ModelConfig c;
    c.vocab_size = m.at("vocab_size").get<int>();
    c.embed_dim = m.at("embed_dim").get<int>();
    c.num_layers = m.at("num_layers").get<int>();
    c.num_heads = m.at("num_heads").get<int>();
    c.ffn_dim = m.at("ffn_dim").get<int>();
    c.max_input_len = m.at("max_input_len").get<int>();
    c.max_output_len = m.at("max_output_len").get<int>();
    c.num_frame_classes = m.at("num_frame_classes").get<int>();
    c.dropout_rate = m.at("dropout_rate").get<double>();
    c.seed = m.at("seed").get<std::uint64_t>();
    c.pooling = m.at("pooling").get<std::string>() == "full_mean" ? PoolingMode::FullMean
                                                                  : PoolingMode::TriggerMean;
    ckpt.mode = train_mode_from_name(header.at("mode").get<std::string>());
    ckpt.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (ckpt.vocab.hash() != header.at("vocab_hash").get<std::uint64_t>())
      throw data_error(path + ": vocabulary hash mismatch");
    ckpt.frame_labels = header.at("frames").get<std::vector<std::string>>();
    ckpt.params = init_params(c);
  } catch (const ojson::exception& e) {
    throw data_error(path + ": corrupt checkpoint header: " + e.what());
  }

  bool ok = true;
  ckpt.params.visit([&](const std::string&, nn::Mat& m) {
    for (Eigen::Index r = 0; r < m.rows() && ok; ++r)
      for (Eigen::Index cc = 0; cc < m.cols() && ok; ++cc) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in) {
          ok = false;
          break;
        }
        m(r, cc) = v;
      }
  });
  if (!ok) throw data_error(path + ": truncated checkpoint tensor data");
  return ckpt;
}

void check_checkpoint_mode(const Checkpoint& ckpt, TrainMode wanted) {
  if (ckpt.mode != wanted)
    throw data_error("checkpoint was trained in " + train_mode_name(ckpt.mode) +
                     " mode but " + train_mode_name(wanted) + " inference was requested");
}

std::string history_to_json(const std::vector<EpochStats>& history) {
  ojson out = ojson::array();
  for (const EpochStats& e : history) {
    ojson rec;
    rec["epoch"] = e.epoch;
    rec["task_loss"] = e.task_loss;
    rec["task_weight"] = e.task_weight;
    if (e.dev_frame_accuracy >= 0.0) rec["dev_frame_accuracy"] = e.dev_frame_accuracy;
    out.push_back(std::move(rec));
  }
  return out.dump(2) + "\n";
}

}  // namespace fsp
