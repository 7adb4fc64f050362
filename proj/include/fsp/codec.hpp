#ifndef FSP_CODEC_HPP
#define FSP_CODEC_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fsp/corpus.hpp"

namespace fsp {

enum class TaskKind { FullGen, Frame, Args };

std::string task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(const std::string& name);

/// One training record: task tag plus the two wire-format strings.
struct TaskExample {
  TaskKind kind = TaskKind::FullGen;
  std::string input_text;
  std::string target_text;
  const AnnotatedExample* source = nullptr;
};

/// Frame label emitted when a generation cannot be parsed at all.
inline constexpr const char* kUnknownFrameLabel = "<unk>";

/// Parse result of a (possibly malformed) generation. Malformed segments
/// are dropped with a diagnostic, never a failure.
struct FrameParse {
  std::string frame;
  std::vector<RoleAssignment> roles;
  std::vector<std::string> diagnostics;
};

// ---- Full-Gen format: "<trigger> = <Frame> | <span text> = <Role> | ... |"

TaskExample fullgen_encode(const AnnotatedExample& ex);
FrameParse fullgen_parse(const std::string& output, const std::vector<std::string>& tokens,
                         TokenSpan trigger);

// ---- Two-task format with explicit token indices

/// "0 tok0 1 tok1 ... i * trig ... * j tokj ...": every token prefixed by
/// its index, trigger tokens wrapped in asterisks, indices keep counting
/// through the trigger.
std::string multitask_index_text(const std::vector<std::string>& tokens, TokenSpan trigger);

/// Exact inverse of multitask_index_text; throws Error(Data) on malformed
/// input.
void multitask_index_parse(const std::string& text, std::vector<std::string>* tokens,
                           TokenSpan* trigger);

std::string frame_task_input(const AnnotatedExample& ex);
std::string args_task_input(const std::vector<std::string>& tokens, TokenSpan trigger,
                            const std::string& frame);
std::string args_target(const std::vector<RoleAssignment>& roles);

/// FRAME-task and ARGS-task records for one example.
std::pair<TaskExample, TaskExample> multitask_encode(const AnnotatedExample& ex);

/// Parses "Label = i-j | ..." keeping only in-range segments.
std::vector<RoleAssignment> multitask_parse_args(const std::string& output, int sentence_len,
                                                 std::vector<std::string>* diagnostics);

/// Positions (in tokenizer output) of the trigger words of a FRAME/ARGS
/// input string; feeds classifier pooling.
std::vector<int> trigger_positions_in_input(const std::string& input_text);

/// Drops repeated (label, span) pairs, keeping first occurrences.
std::vector<RoleAssignment> dedupe_roles(const std::vector<RoleAssignment>& roles);

// ---- Vocabulary

/// Word-level vocabulary with reserved ids and atomic integer index
/// tokens. The tokenizer splits on single spaces, detaches a trailing
/// colon, and splits integer ranges "i-j" into three tokens; decode
/// reverses both so encoder-produced strings round-trip exactly.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  static Vocabulary build(const Corpus& corpus);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int id(const std::string& token) const;
  const std::string& token(int id) const;

  static std::vector<std::string> tokenize(const std::string& text);
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  /// FNV-1a over the token list; stored in checkpoints.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace fsp

#endif
