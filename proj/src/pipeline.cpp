#include "fsp/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fsp {

using ojson = nlohmann::ordered_json;

FrameInterpretation predict_fullgen(const ModelParams& params, const Vocabulary& vocab,
                                    const std::vector<std::string>& tokens, TokenSpan trigger) {
  AnnotatedExample ex;
  ex.tokens = tokens;
  ex.trigger = trigger;
  TaskExample task = fullgen_encode(ex);

  EncoderOutput enc = encode(params, vocab.encode(task.input_text));
  std::vector<int> out_ids = decode_greedy(params, enc, params.config.max_output_len);
  FrameParse parse = fullgen_parse(vocab.decode(out_ids), tokens, trigger);

  FrameInterpretation interp;
  interp.frame = parse.frame;
  interp.roles = dedupe_roles(parse.roles);
  interp.diagnostics = parse.diagnostics;
  return interp;
}

FrameInterpretation predict_multitask(const ModelParams& params, const Vocabulary& vocab,
                                      const std::vector<std::string>& frame_labels,
                                      const std::vector<std::string>& tokens, TokenSpan trigger,
                                      const std::string* gold_frame) {
  AnnotatedExample ex;
  ex.tokens = tokens;
  ex.trigger = trigger;
  const std::string frame_input = frame_task_input(ex);
  EncoderOutput enc = encode(params, vocab.encode(frame_input));
  Eigen::VectorXd probs =
      classify_frame(params, enc, trigger_positions_in_input(frame_input));

  FrameInterpretation interp;
  if (gold_frame != nullptr) {
    interp.frame = *gold_frame;
    auto it = std::find(frame_labels.begin(), frame_labels.end(), *gold_frame);
    if (it != frame_labels.end()) {
      const Eigen::Index idx = it - frame_labels.begin();
      if (idx < probs.size()) interp.confidence = probs(idx);
    }
  } else {
    Eigen::Index argmax;
    const double top = probs.maxCoeff(&argmax);
    if (argmax >= static_cast<Eigen::Index>(frame_labels.size()))
      throw data_error("classifier class index has no frame label");
    interp.frame = frame_labels[static_cast<std::size_t>(argmax)];
    interp.confidence = top;
  }

  // step 2: argument decoding conditioned on the chosen frame
  const std::string args_input = args_task_input(tokens, trigger, interp.frame);
  EncoderOutput args_enc = encode(params, vocab.encode(args_input));
  std::vector<int> out_ids = decode_greedy(params, args_enc, params.config.max_output_len);
  interp.roles = dedupe_roles(multitask_parse_args(
      vocab.decode(out_ids), static_cast<int>(tokens.size()), &interp.diagnostics));
  return interp;
}

std::vector<FrameInterpretation> batch_predict(const ModelParams& params, const Vocabulary& vocab,
                                               const std::vector<std::string>& frame_labels,
                                               const Corpus& corpus, TrainMode mode,
                                               bool gold_frames, const Ontology* role_filter) {
  if (gold_frames && mode != TrainMode::MultiTask)
    throw usage_error("gold-frame conditioning only applies to multitask mode");
  std::vector<FrameInterpretation> out;
  out.reserve(corpus.examples.size());
  for (const AnnotatedExample& ex : corpus.examples) {
    FrameInterpretation interp =
        mode == TrainMode::FullGen
            ? predict_fullgen(params, vocab, ex.tokens, ex.trigger)
            : predict_multitask(params, vocab, frame_labels, ex.tokens, ex.trigger,
                                gold_frames ? &ex.frame : nullptr);
    if (role_filter != nullptr) {
      auto it = role_filter->frame_roles.find(interp.frame);
      if (it != role_filter->frame_roles.end()) {
        std::vector<RoleAssignment> kept;
        for (const RoleAssignment& r : interp.roles) {
          if (std::find(it->second.begin(), it->second.end(), r.label) != it->second.end()) {
            kept.push_back(r);
          } else {
            interp.diagnostics.push_back("role '" + r.label + "' not permitted for frame '" +
                                         interp.frame + "', dropped");
          }
        }
        interp.roles = std::move(kept);
      }
    }
    out.push_back(std::move(interp));
  }
  return out;
}

std::vector<PredictionRecord> make_prediction_records(
    const Corpus& corpus, const std::vector<FrameInterpretation>& preds) {
  if (corpus.examples.size() != preds.size())
    throw usage_error("prediction count does not match corpus size");
  std::vector<PredictionRecord> out;
  out.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    PredictionRecord rec;
    rec.tokens = corpus.examples[i].tokens;
    rec.trigger = corpus.examples[i].trigger;
    rec.frame = preds[i].frame;
    rec.roles = preds[i].roles;
    rec.confidence = preds[i].confidence;
    rec.diagnostics = preds[i].diagnostics;
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

std::string record_to_json_line(const PredictionRecord& rec) {
  ojson j;
  j["tokens"] = rec.tokens;
  j["trigger"] = {rec.trigger.start, rec.trigger.end};
  j["frame"] = rec.frame;
  ojson roles = ojson::array();
  for (const RoleAssignment& r : rec.roles)
    roles.push_back({{"label", r.label}, {"span", {r.span.start, r.span.end}}});
  j["roles"] = std::move(roles);
  if (rec.confidence.has_value()) j["confidence"] = *rec.confidence;
  j["diagnostics"] = rec.diagnostics;
  return j.dump();
}

PredictionRecord record_from_json(const ojson& j) {
  PredictionRecord rec;
  rec.tokens = j.at("tokens").get<std::vector<std::string>>();
  rec.trigger = {j.at("trigger").at(0).get<int>(), j.at("trigger").at(1).get<int>()};
  rec.frame = j.at("frame").get<std::string>();
  for (const ojson& r : j.at("roles")) {
    rec.roles.push_back({r.at("label").get<std::string>(),
                         {r.at("span").at(0).get<int>(), r.at("span").at(1).get<int>()}});
  }
  if (j.contains("confidence")) rec.confidence = j.at("confidence").get<double>();
  if (j.contains("diagnostics"))
    rec.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  return rec;
}

}  // namespace

void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw data_error("cannot open " + tmp.string() + " for writing");
    for (const PredictionRecord& rec : records) out << record_to_json_line(rec) << '\n';
    if (!out) throw data_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open predictions file " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(ojson::parse(line)));
    } catch (const ojson::exception& e) {
      throw data_error(path.string() + ":" + std::to_string(lineno) +
                       ": bad prediction record: " + e.what());
    }
  }
  return out;
}

}  // namespace fsp
