#include "fsp/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fsp/rng.hpp"

namespace fsp {

using ojson = nlohmann::ordered_json;

bool valid_token(const std::string& token) {
  if (token.empty()) return false;
  for (char c : token) {
    if (std::isspace(static_cast<unsigned char>(c))) return false;
    if (c == '*' || c == '|' || c == '=') return false;
  }
  return true;
}

bool valid_label(const std::string& label) {
  if (label.empty()) return false;
  for (char c : label) {
    if (c == '*' || c == '|' || c == '=') return false;
  }
  return true;
}

bool Ontology::has_frame(const std::string& label) const {
  return std::find(frames.begin(), frames.end(), label) != frames.end();
}

bool Ontology::has_role(const std::string& label) const {
  return std::find(roles.begin(), roles.end(), label) != roles.end();
}

int Ontology::frame_index(const std::string& label) const {
  auto it = std::find(frames.begin(), frames.end(), label);
  return it == frames.end() ? -1 : static_cast<int>(it - frames.begin());
}

void validate_example(const AnnotatedExample& ex, const Ontology* ontology) {
  if (ex.tokens.empty()) throw data_error("example has no tokens");
  for (const auto& tok : ex.tokens) {
    if (!valid_token(tok))
      throw data_error("invalid token '" + tok + "' (whitespace or reserved character * | =)");
  }
  const int n = static_cast<int>(ex.tokens.size());
  if (!ex.trigger.valid_within(n)) {
    throw data_error("trigger span [" + std::to_string(ex.trigger.start) + "," +
                     std::to_string(ex.trigger.end) + "] out of range for " +
                     std::to_string(n) + " tokens");
  }
  if (!valid_label(ex.frame)) throw data_error("invalid frame label '" + ex.frame + "'");
  for (const auto& role : ex.roles) {
    if (!valid_label(role.label)) throw data_error("invalid role label '" + role.label + "'");
    if (!role.span.valid_within(n)) {
      throw data_error("role '" + role.label + "' span [" + std::to_string(role.span.start) +
                       "," + std::to_string(role.span.end) + "] out of range for " +
                       std::to_string(n) + " tokens");
    }
  }
  if (ontology != nullptr) {
    if (!ontology->has_frame(ex.frame))
      throw data_error("frame label '" + ex.frame + "' not in ontology");
    for (const auto& role : ex.roles) {
      if (!ontology->has_role(role.label))
        throw data_error("role label '" + role.label + "' not in ontology");
    }
  }
}

void validate_corpus(const Corpus& corpus) {
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    try {
      validate_example(corpus.examples[i], &corpus.ontology);
    } catch (const Error& e) {
      throw data_error("example " + std::to_string(i) + ": " + e.what());
    }
  }
}

std::string ontology_to_json_line(const Ontology& ont) {
  ojson j;
  ojson o;
  o["frames"] = ont.frames;
  o["roles"] = ont.roles;
  if (!ont.frame_roles.empty()) o["frame_roles"] = ont.frame_roles;
  j["ontology"] = o;
  return j.dump();
}

std::string example_to_json_line(const AnnotatedExample& ex) {
  ojson j;
  j["tokens"] = ex.tokens;
  j["trigger"] = {ex.trigger.start, ex.trigger.end};
  j["frame"] = ex.frame;
  ojson roles = ojson::array();
  for (const auto& role : ex.roles) {
    ojson r;
    r["label"] = role.label;
    r["span"] = {role.span.start, role.span.end};
    roles.push_back(std::move(r));
  }
  j["roles"] = std::move(roles);
  return j.dump();
}

namespace {

TokenSpan span_from_json(const ojson& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw data_error("span must be a [start, end] integer pair");
  return TokenSpan{j[0].get<int>(), j[1].get<int>()};
}

ojson parse_line(const std::string& line) {
  ojson j = ojson::parse(line, nullptr, false);
  if (j.is_discarded()) throw data_error("malformed JSON");
  return j;
}

}  // namespace

Ontology ontology_from_json_line(const std::string& line) {
  ojson j = parse_line(line);
  if (!j.contains("ontology")) throw data_error("expected ontology header record");
  const ojson& o = j["ontology"];
  Ontology ont;
  ont.frames = o.at("frames").get<std::vector<std::string>>();
  ont.roles = o.at("roles").get<std::vector<std::string>>();
  if (o.contains("frame_roles"))
    ont.frame_roles = o["frame_roles"].get<std::map<std::string, std::vector<std::string>>>();
  auto check_unique = [](const std::vector<std::string>& labels, const char* what) {
    std::vector<std::string> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw data_error(std::string("duplicate ") + what + " label in ontology");
  };
  check_unique(ont.frames, "frame");
  check_unique(ont.roles, "role");
  return ont;
}

AnnotatedExample example_from_json_line(const std::string& line) {
  ojson j = parse_line(line);
  AnnotatedExample ex;
  ex.tokens = j.at("tokens").get<std::vector<std::string>>();
  ex.trigger = span_from_json(j.at("trigger"));
  ex.frame = j.at("frame").get<std::string>();
  for (const ojson& r : j.at("roles")) {
    ex.roles.push_back(RoleAssignment{r.at("label").get<std::string>(), span_from_json(r.at("span"))});
  }
  return ex;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open corpus file: " + path.string());
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      if (!have_header) {
        corpus.ontology = ontology_from_json_line(line);
        have_header = true;
      } else {
        AnnotatedExample ex = example_from_json_line(line);
        validate_example(ex, &corpus.ontology);
        corpus.examples.push_back(std::move(ex));
      }
    } catch (const Error& e) {
      throw data_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ojson::exception& e) {
      throw data_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw data_error(path.string() + ": missing ontology header record");
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw data_error("cannot write corpus file: " + path.string());
    out << ontology_to_json_line(corpus.ontology) << '\n';
    for (const auto& ex : corpus.examples) out << example_to_json_line(ex) << '\n';
    if (!out) throw data_error("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::array<Corpus, 3> split_corpus(const Corpus& corpus, std::array<double, 3> ratios,
                                   std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios) {
    if (!(r > 0.0)) throw usage_error("split ratios must be positive");
  }
  if (std::abs(sum - 1.0) > 1e-9) throw usage_error("split ratios must sum to 1");

  const std::size_t n = corpus.examples.size();
  // Largest-remainder apportionment keeps each size within +-1 of ratio*N.
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - std::floor(exact);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return a < b;
  });
  for (int k = 0; assigned < n; ++k) {
    sizes[order[k % 3]] += 1;
    ++assigned;
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  shuffle_vec(idx, rng);

  std::array<Corpus, 3> out;
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    out[i].ontology = corpus.ontology;
    for (std::size_t k = 0; k < sizes[i]; ++k) out[i].examples.push_back(corpus.examples[idx[pos++]]);
  }
  return out;
}

}  // namespace fsp
