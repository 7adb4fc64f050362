#ifndef FSP_CORPUS_HPP
#define FSP_CORPUS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsp/errors.hpp"

namespace fsp {

/// Inclusive token-index range, 0-based on both ends.
struct TokenSpan {
  int start = 0;
  int end = 0;

  bool operator==(const TokenSpan&) const = default;
  auto operator<=>(const TokenSpan&) const = default;
  int length() const { return end - start + 1; }
  bool valid() const { return start >= 0 && start <= end; }
  bool valid_within(int token_count) const { return valid() && end < token_count; }
};

struct RoleAssignment {
  std::string label;
  TokenSpan span;

  bool operator==(const RoleAssignment&) const = default;
  auto operator<=>(const RoleAssignment&) const = default;
};

/// One (sentence, trigger) record with its gold frame and role spans.
/// Role spans may overlap each other and the trigger.
struct AnnotatedExample {
  std::vector<std::string> tokens;
  TokenSpan trigger;
  std::string frame;
  std::vector<RoleAssignment> roles;

  bool operator==(const AnnotatedExample&) const = default;
};

/// Frame/role label inventory. Ordering is fixed and defines classifier
/// class indices.
struct Ontology {
  std::vector<std::string> frames;
  std::vector<std::string> roles;
  // Optional frame -> permitted role labels. Empty map means unrestricted.
  std::map<std::string, std::vector<std::string>> frame_roles;

  bool operator==(const Ontology&) const = default;

  bool has_frame(const std::string& label) const;
  bool has_role(const std::string& label) const;
  /// Classifier class index of a frame label; -1 if unknown.
  int frame_index(const std::string& label) const;
};

struct Corpus {
  Ontology ontology;
  std::vector<AnnotatedExample> examples;

  bool operator==(const Corpus&) const = default;
};

/// A token may not contain whitespace or the reserved characters * | =.
bool valid_token(const std::string& token);
/// A label is non-empty and contains none of = | *.
bool valid_label(const std::string& label);

/// Throws Error(Data) describing the first violated invariant.
/// `ontology`, when non-null, additionally checks label membership.
void validate_example(const AnnotatedExample& ex, const Ontology* ontology);
void validate_corpus(const Corpus& corpus);

/// Line-delimited JSON: first line {"ontology":...}, then one example per
/// line. Fixed key order; save/load round-trips byte-identically.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

std::string example_to_json_line(const AnnotatedExample& ex);
std::string ontology_to_json_line(const Ontology& ont);
AnnotatedExample example_from_json_line(const std::string& line);
Ontology ontology_from_json_line(const std::string& line);

/// Random disjoint partition; split sizes are within +-1 of ratio*N and
/// deterministic in `seed`. Ratios must be positive and sum to 1 (1e-9).
std::array<Corpus, 3> split_corpus(const Corpus& corpus,
                                   std::array<double, 3> ratios,
                                   std::uint64_t seed);

}  // namespace fsp

#endif
