#include "fsp/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fsp {

using ojson = nlohmann::ordered_json;

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

void check_aligned(const std::vector<ParseInstance>& preds,
                   const std::vector<ParseInstance>& golds) {
  if (preds.size() != golds.size())
    throw data_error("prediction/gold misalignment: " + std::to_string(preds.size()) + " vs " +
                     std::to_string(golds.size()) + " records");
}

/// Micro P/R with the zero-denominator convention: a side with no items is
/// scored 1 when the other side is empty too, else 0.
PRF micro_prf(std::size_t tp, std::size_t pred_total, std::size_t gold_total) {
  PRF out;
  out.precision = pred_total > 0 ? static_cast<double>(tp) / static_cast<double>(pred_total)
                                 : (gold_total == 0 ? 1.0 : 0.0);
  out.recall = gold_total > 0 ? static_cast<double>(tp) / static_cast<double>(gold_total)
                              : (pred_total == 0 ? 1.0 : 0.0);
  out.f1 = f1_score(out.precision, out.recall);
  return out;
}

bool gated_out(const ParseInstance& pred, const ParseInstance& gold, bool gate_frames) {
  return gate_frames && pred.frame != gold.frame;
}

std::set<int> span_tokens(TokenSpan span) {
  std::set<int> out;
  for (int t = span.start; t <= span.end; ++t) out.insert(t);
  return out;
}

}  // namespace

double frame_accuracy(const std::vector<ParseInstance>& preds,
                      const std::vector<ParseInstance>& golds) {
  check_aligned(preds, golds);
  if (preds.empty()) throw data_error("frame_accuracy needs at least one instance");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].frame == golds[i].frame) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

PRF exact_match(const std::vector<ParseInstance>& preds, const std::vector<ParseInstance>& golds,
                bool gate_frames) {
  check_aligned(preds, golds);
  std::size_t tp = 0, pred_total = 0, gold_total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pred_total += preds[i].roles.size();
    gold_total += golds[i].roles.size();
    if (gated_out(preds[i], golds[i], gate_frames)) continue;
    // multiset intersection of (label, span) pairs
    std::multiset<RoleAssignment> gold_pool(golds[i].roles.begin(), golds[i].roles.end());
    for (const RoleAssignment& r : preds[i].roles) {
      auto it = gold_pool.find(r);
      if (it != gold_pool.end()) {
        ++tp;
        gold_pool.erase(it);
      }
    }
  }
  return micro_prf(tp, pred_total, gold_total);
}

PRF global_match(const std::vector<ParseInstance>& preds, const std::vector<ParseInstance>& golds,
                 bool gate_frames) {
  check_aligned(preds, golds);
  std::size_t tp = 0, pred_total = 0, gold_total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    // set semantics within an example: overlapping same-label spans cover
    // a (label, token) pair once
    std::set<std::pair<std::string, int>> pred_pairs, gold_pairs;
    for (const RoleAssignment& r : preds[i].roles)
      for (int t = r.span.start; t <= r.span.end; ++t) pred_pairs.insert({r.label, t});
    for (const RoleAssignment& r : golds[i].roles)
      for (int t = r.span.start; t <= r.span.end; ++t) gold_pairs.insert({r.label, t});
    pred_total += pred_pairs.size();
    gold_total += gold_pairs.size();
    if (gated_out(preds[i], golds[i], gate_frames)) continue;
    for (const auto& p : pred_pairs)
      if (gold_pairs.count(p) != 0) ++tp;
  }
  return micro_prf(tp, pred_total, gold_total);
}

PRF soft_match(const std::vector<ParseInstance>& preds, const std::vector<ParseInstance>& golds,
               bool gate_frames) {
  check_aligned(preds, golds);
  double p_sum = 0.0, r_sum = 0.0;
  std::size_t p_count = 0, r_count = 0;

  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (gated_out(preds[i], golds[i], gate_frames)) {
      p_count += preds[i].roles.size();  // each predicted role: P = 0
      r_count += golds[i].roles.size();  // each gold role: R = 0
      continue;
    }

    // candidate (gold, pred) pairs of the same label, greedily matched by
    // descending token overlap; ties broken by gold then pred index
    struct Cand {
      std::size_t overlap;
      std::size_t gi, pi;
    };
    std::vector<std::set<int>> gold_tok, pred_tok;
    for (const RoleAssignment& r : golds[i].roles) gold_tok.push_back(span_tokens(r.span));
    for (const RoleAssignment& r : preds[i].roles) pred_tok.push_back(span_tokens(r.span));

    std::vector<Cand> cands;
    for (std::size_t gi = 0; gi < golds[i].roles.size(); ++gi) {
      for (std::size_t pi = 0; pi < preds[i].roles.size(); ++pi) {
        if (golds[i].roles[gi].label != preds[i].roles[pi].label) continue;
        std::size_t overlap = 0;
        for (int t : pred_tok[pi]) overlap += gold_tok[gi].count(t);
        if (overlap > 0) cands.push_back({overlap, gi, pi});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      if (a.gi != b.gi) return a.gi < b.gi;
      return a.pi < b.pi;
    });

    std::vector<bool> gold_used(golds[i].roles.size(), false);
    std::vector<bool> pred_used(preds[i].roles.size(), false);
    for (const Cand& c : cands) {
      if (gold_used[c.gi] || pred_used[c.pi]) continue;
      gold_used[c.gi] = true;
      pred_used[c.pi] = true;
      p_sum += static_cast<double>(c.overlap) / static_cast<double>(pred_tok[c.pi].size());
      ++p_count;
      r_sum += static_cast<double>(c.overlap) / static_cast<double>(gold_tok[c.gi].size());
      ++r_count;
    }
    for (std::size_t gi = 0; gi < gold_used.size(); ++gi)
      if (!gold_used[gi]) ++r_count;  // missed gold instance: R = 0
    for (std::size_t pi = 0; pi < pred_used.size(); ++pi)
      if (!pred_used[pi]) ++p_count;  // spurious prediction: P = 0
  }

  PRF out;
  out.precision = p_count > 0 ? p_sum / static_cast<double>(p_count) : (r_count == 0 ? 1.0 : 0.0);
  out.recall = r_count > 0 ? r_sum / static_cast<double>(r_count) : (p_count == 0 ? 1.0 : 0.0);
  out.f1 = f1_score(out.precision, out.recall);
  return out;
}

MatchReport score_instances(const std::vector<ParseInstance>& preds,
                            const std::vector<ParseInstance>& golds, bool gate_frames) {
  MatchReport report;
  report.frame_accuracy = frame_accuracy(preds, golds);
  report.exact = exact_match(preds, golds, gate_frames);
  report.soft = soft_match(preds, golds, gate_frames);
  report.global = global_match(preds, golds, gate_frames);
  report.instances = preds.size();
  for (const ParseInstance& g : golds) report.gold_roles += g.roles.size();
  for (const ParseInstance& p : preds) report.predicted_roles += p.roles.size();
  return report;
}

std::vector<ParseInstance> corpus_instances(const Corpus& corpus) {
  std::vector<ParseInstance> out;
  out.reserve(corpus.examples.size());
  for (const AnnotatedExample& ex : corpus.examples) out.push_back({ex.frame, ex.roles});
  return out;
}

std::vector<ParseInstance> prediction_instances(const std::vector<PredictionRecord>& records) {
  std::vector<ParseInstance> out;
  out.reserve(records.size());
  for (const PredictionRecord& rec : records) out.push_back({rec.frame, rec.roles});
  return out;
}

MatchReport score_files(const std::filesystem::path& gold_path,
                        const std::filesystem::path& pred_path, bool gate_frames) {
  const Corpus gold = load_corpus(gold_path);
  const std::vector<PredictionRecord> preds = load_predictions(pred_path);
  if (gold.examples.size() != preds.size())
    throw data_error("misaligned files: " + std::to_string(gold.examples.size()) +
                     " gold examples vs " + std::to_string(preds.size()) + " predictions");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].tokens != gold.examples[i].tokens ||
        preds[i].trigger != gold.examples[i].trigger)
      throw data_error("record " + std::to_string(i) +
                       ": prediction sentence does not match gold sentence");
  }
  MatchReport report =
      score_instances(prediction_instances(preds), corpus_instances(gold), gate_frames);
  for (const PredictionRecord& rec : preds) report.diagnostics += rec.diagnostics.size();
  return report;
}

std::string report_to_json(const MatchReport& report) {
  auto prf = [](const PRF& x) {
    return ojson{{"precision", x.precision}, {"recall", x.recall}, {"f1", x.f1}};
  };
  ojson j;
  j["frame_accuracy"] = report.frame_accuracy;
  j["exact"] = prf(report.exact);
  j["soft"] = prf(report.soft);
  j["global"] = prf(report.global);
  j["counts"] = {{"instances", report.instances},
                 {"gold_roles", report.gold_roles},
                 {"predicted_roles", report.predicted_roles},
                 {"diagnostics", report.diagnostics}};
  return j.dump(2) + "\n";
}

std::string report_table(const MatchReport& report) {
  char buf[256];
  std::ostringstream out;
  std::snprintf(buf, sizeof(buf), "%-12s %9s %9s %9s\n", "metric", "P", "R", "F1");
  out << buf;
  auto row = [&](const char* name, const PRF& x) {
    std::snprintf(buf, sizeof(buf), "%-12s %9.4f %9.4f %9.4f\n", name, x.precision, x.recall,
                  x.f1);
    out << buf;
  };
  row("exact", report.exact);
  row("soft", report.soft);
  row("global", report.global);
  std::snprintf(buf, sizeof(buf), "%-12s %9.4f\n", "frame-acc", report.frame_accuracy);
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-12s %9zu %9zu %9zu\n", "counts", report.instances,
                report.gold_roles, report.predicted_roles);
  out << buf;
  return out.str();
}

}  // namespace fsp
