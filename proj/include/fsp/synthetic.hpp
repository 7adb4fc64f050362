#ifndef FSP_SYNTHETIC_HPP
#define FSP_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fsp/corpus.hpp"

namespace fsp {

/// Named pool of filler phrases. All phrases in one pool have the same
/// token count, so gold spans are fixed per template.
struct PhrasePool {
  std::string name;
  std::vector<std::vector<std::string>> phrases;
};

struct TemplatePiece {
  enum class Kind { Literal, Trigger, Slot };
  Kind kind = Kind::Literal;
  std::vector<std::string> words;  // Literal only
  std::string role;                // Slot only
  std::string pool;                // Slot only
};

struct SentenceTemplate {
  std::vector<TemplatePiece> pieces;
  // When non-empty, overrides the frame trigger lexicon for this template.
  std::vector<std::string> triggers;
};

struct FrameSpec {
  std::string name;
  std::vector<std::string> roles;  // 1..4 roles
  std::vector<std::string> triggers;
  std::vector<SentenceTemplate> templates;
};

struct GeneratorSpec {
  std::vector<FrameSpec> frames;
  std::vector<PhrasePool> pools;
  std::vector<std::string> role_inventory;  // ontology role list
  int example_count = 5000;
};

/// 12 frames, 20 roles, 5000 examples; >=25% of trigger words shared
/// between frames, plus one genuinely ambiguous template pair.
GeneratorSpec default_generator_spec();

/// Throws Error(Data) on an invalid spec (fewer than 2 frames, zero
/// templates, bad role counts, unmet trigger-ambiguity requirement, ...).
void validate_generator_spec(const GeneratorSpec& spec);

/// Deterministic in (spec, seed). Every produced example passes
/// validate_example against the generated ontology.
Corpus generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

std::string generator_spec_to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const std::string& text);

}  // namespace fsp

#endif
