#include "fsp/codec.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace fsp {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(' ');
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(' ');
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::vector<std::string> split_segments(const std::string& s) {
  std::vector<std::string> segments;
  std::string cur;
  for (char c : s) {
    if (c == '|') {
      segments.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  std::string tail = trim(cur);
  if (!tail.empty()) segments.push_back(tail);
  return segments;
}

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<RoleAssignment> roles_by_span_start(const std::vector<RoleAssignment>& roles) {
  std::vector<RoleAssignment> sorted = roles;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RoleAssignment& a, const RoleAssignment& b) {
                     return a.span.start < b.span.start;
                   });
  return sorted;
}

std::string span_text(const std::vector<std::string>& tokens, TokenSpan span) {
  std::string out;
  for (int i = span.start; i <= span.end; ++i) {
    if (i > span.start) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string join_segments(const std::vector<std::string>& segments) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += " | ";
    out += segments[i];
  }
  if (!segments.empty()) out += " |";
  return out;
}

// Splits a segment on its first " = "; returns false if absent.
bool split_key_value(const std::string& segment, std::string* key, std::string* value) {
  std::size_t pos = segment.find(" = ");
  if (pos == std::string::npos) return false;
  *key = trim(segment.substr(0, pos));
  *value = trim(segment.substr(pos + 3));
  return !key->empty() && !value->empty();
}

}  // namespace

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::FullGen: return "fullgen";
    case TaskKind::Frame: return "frame";
    case TaskKind::Args: return "args";
  }
  return "?";
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "fullgen") return TaskKind::FullGen;
  if (name == "frame") return TaskKind::Frame;
  if (name == "args") return TaskKind::Args;
  throw data_error("unknown task kind '" + name + "'");
}

TaskExample fullgen_encode(const AnnotatedExample& ex) {
  TaskExample out;
  out.kind = TaskKind::FullGen;
  out.source = &ex;

  std::string input;
  for (int i = 0; i < static_cast<int>(ex.tokens.size()); ++i) {
    if (!input.empty()) input += ' ';
    if (i == ex.trigger.start) input += "* ";
    input += ex.tokens[i];
    if (i == ex.trigger.end) input += " *";
  }
  out.input_text = input;

  std::vector<std::string> segments;
  segments.push_back(span_text(ex.tokens, ex.trigger) + " = " + ex.frame);
  for (const auto& role : roles_by_span_start(ex.roles)) {
    segments.push_back(span_text(ex.tokens, role.span) + " = " + role.label);
  }
  out.target_text = join_segments(segments);
  return out;
}

namespace {

// Leftmost contiguous token-subsequence match; -1 if absent.
int find_subsequence(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > tokens.size()) return -1;
  for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < needle.size(); ++k) {
      if (tokens[i + k] != needle[k]) {
        match = false;
        break;
      }
    }
    if (match) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

FrameParse fullgen_parse(const std::string& output, const std::vector<std::string>& tokens,
                         TokenSpan trigger) {
  (void)trigger;
  FrameParse parse;
  parse.frame = kUnknownFrameLabel;

  const std::vector<std::string> segments = split_segments(output);
  if (segments.empty()) {
    parse.diagnostics.push_back("empty output");
    return parse;
  }

  bool have_frame = false;
  for (const auto& segment : segments) {
    if (segment.empty()) continue;
    std::string key, value;
    if (!split_key_value(segment, &key, &value)) {
      parse.diagnostics.push_back("segment without ' = ' dropped: '" + segment + "'");
      continue;
    }
    if (!have_frame) {
      parse.frame = value;
      have_frame = true;
      continue;
    }
    int at = find_subsequence(tokens, split_words(key));
    if (at < 0) {
      parse.diagnostics.push_back("role text not found in sentence: '" + key + "'");
      continue;
    }
    parse.roles.push_back(RoleAssignment{
        value, TokenSpan{at, at + static_cast<int>(split_words(key).size()) - 1}});
  }
  if (!have_frame) parse.diagnostics.push_back("no frame segment found");
  return parse;
}

std::string multitask_index_text(const std::vector<std::string>& tokens, TokenSpan trigger) {
  std::string out;
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i);
    if (i == trigger.start) out += " *";
    out += ' ';
    out += tokens[i];
    if (i == trigger.end) out += " *";
  }
  return out;
}

void multitask_index_parse(const std::string& text, std::vector<std::string>* tokens,
                           TokenSpan* trigger) {
  tokens->clear();
  int trig_start = -1, trig_end = -1;
  bool in_trigger = false;
  bool expect_index = true;
  for (const auto& word : split_words(text)) {
    if (word == "*") {
      if (!in_trigger) {
        in_trigger = true;
        trig_start = static_cast<int>(tokens->size());
      } else {
        in_trigger = false;
        trig_end = static_cast<int>(tokens->size()) - 1;
      }
      continue;
    }
    if (expect_index) {
      if (word != std::to_string(tokens->size()))
        throw data_error("indexed text: expected index " + std::to_string(tokens->size()) +
                         ", got '" + word + "'");
      expect_index = false;
    } else {
      tokens->push_back(word);
      expect_index = true;
    }
  }
  if (!expect_index || in_trigger || trig_start < 0 || trig_end < trig_start)
    throw data_error("indexed text: truncated or missing trigger markers");
  *trigger = TokenSpan{trig_start, trig_end};
}

std::string frame_task_input(const AnnotatedExample& ex) {
  return "FRAME: " + multitask_index_text(ex.tokens, ex.trigger);
}

std::string args_task_input(const std::vector<std::string>& tokens, TokenSpan trigger,
                            const std::string& frame) {
  return "ARGS for " + frame + ": " + multitask_index_text(tokens, trigger);
}

std::string args_target(const std::vector<RoleAssignment>& roles) {
  std::vector<std::string> segments;
  for (const auto& role : roles_by_span_start(roles)) {
    segments.push_back(role.label + " = " + std::to_string(role.span.start) + "-" +
                       std::to_string(role.span.end));
  }
  return join_segments(segments);
}

std::pair<TaskExample, TaskExample> multitask_encode(const AnnotatedExample& ex) {
  TaskExample frame_task;
  frame_task.kind = TaskKind::Frame;
  frame_task.source = &ex;
  frame_task.input_text = frame_task_input(ex);
  frame_task.target_text = ex.frame;

  TaskExample args_task;
  args_task.kind = TaskKind::Args;
  args_task.source = &ex;
  args_task.input_text = args_task_input(ex.tokens, ex.trigger, ex.frame);
  args_task.target_text = args_target(ex.roles);
  return {frame_task, args_task};
}

std::vector<RoleAssignment> multitask_parse_args(const std::string& output, int sentence_len,
                                                 std::vector<std::string>* diagnostics) {
  std::vector<RoleAssignment> roles;
  for (const auto& segment : split_segments(output)) {
    if (segment.empty()) continue;
    std::string label, range;
    if (!split_key_value(segment, &label, &range)) {
      if (diagnostics) diagnostics->push_back("segment without ' = ' dropped: '" + segment + "'");
      continue;
    }
    // accept "i-j" and the spaced "i - j" the tokenizer can produce
    std::size_t dash = range.find('-');
    if (dash == std::string::npos) {
      if (diagnostics) diagnostics->push_back("segment without range dropped: '" + segment + "'");
      continue;
    }
    std::string lo = trim(range.substr(0, dash));
    std::string hi = trim(range.substr(dash + 1));
    if (!is_integer(lo) || !is_integer(hi)) {
      if (diagnostics) diagnostics->push_back("non-numeric range dropped: '" + segment + "'");
      continue;
    }
    int start = std::stoi(lo);
    int end = std::stoi(hi);
    if (start > end || end >= sentence_len) {
      if (diagnostics)
        diagnostics->push_back("out-of-range span " + lo + "-" + hi + " dropped: '" + segment + "'");
      continue;
    }
    roles.push_back(RoleAssignment{label, TokenSpan{start, end}});
  }
  return roles;
}

std::vector<int> trigger_positions_in_input(const std::string& input_text) {
  const std::vector<std::string> words = Vocabulary::tokenize(input_text);
  std::vector<int> positions;
  int first = -1;
  for (int i = 0; i < static_cast<int>(words.size()); ++i) {
    if (words[i] == "*") {
      if (first < 0) {
        first = i;
      } else {
        // between the asterisks: trigger word, then (index, word) pairs
        for (int p = first + 1; p < i; p += 2) positions.push_back(p);
        return positions;
      }
    }
  }
  return positions;
}

std::vector<RoleAssignment> dedupe_roles(const std::vector<RoleAssignment>& roles) {
  std::vector<RoleAssignment> out;
  std::set<std::pair<std::string, TokenSpan>> seen;
  for (const auto& role : roles) {
    if (seen.insert({role.label, role.span}).second) out.push_back(role);
  }
  return out;
}

// ---- Vocabulary

std::vector<std::string> Vocabulary::tokenize(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& raw : split_words(text)) {
    std::string word = raw;
    std::string colon;
    if (word.size() > 1 && word.back() == ':') {
      colon = ":";
      word.pop_back();
    }
    std::size_t dash = word.find('-');
    if (dash != std::string::npos && dash > 0 && dash + 1 < word.size() &&
        is_integer(word.substr(0, dash)) && is_integer(word.substr(dash + 1))) {
      out.push_back(word.substr(0, dash));
      out.push_back("-");
      out.push_back(word.substr(dash + 1));
    } else {
      out.push_back(word);
    }
    if (!colon.empty()) out.push_back(colon);
  }
  return out;
}

Vocabulary Vocabulary::build(const Corpus& corpus) {
  std::vector<std::string> tokens = {"<pad>", "<bos>", "<eos>", "<unk>", "*", "|",
                                     "=",     "-",     "FRAME", ":",     "ARGS", "for"};
  std::set<std::string> present(tokens.begin(), tokens.end());

  std::size_t max_len = 1;
  for (const auto& ex : corpus.examples) max_len = std::max(max_len, ex.tokens.size());
  for (std::size_t i = 0; i < max_len; ++i) {
    std::string t = std::to_string(i);
    if (present.insert(t).second) tokens.push_back(t);
  }

  std::set<std::string> words;
  auto add_text = [&](const std::string& text) {
    for (const auto& w : tokenize(text)) {
      if (!present.count(w)) words.insert(w);
    }
  };
  for (const auto& f : corpus.ontology.frames) add_text(f);
  for (const auto& r : corpus.ontology.roles) add_text(r);
  for (const auto& ex : corpus.examples) {
    for (const auto& tok : ex.tokens) add_text(tok);
  }
  tokens.insert(tokens.end(), words.begin(), words.end());
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) v.ids_[v.tokens_[i]] = i;
  if (v.size() < 4 || v.tokens_[kPad] != "<pad>" || v.tokens_[kUnk] != "<unk>")
    throw data_error("vocabulary token list missing reserved entries");
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int i) const {
  return tokens_.at(static_cast<std::size_t>(i));
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& w : tokenize(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> parts;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    int i = ids[k];
    if (i == kPad || i == kBos || i == kEos) continue;
    const std::string& tok = token(i);
    if (tok == ":" && !parts.empty()) {
      parts.back() += ':';
      continue;
    }
    if (tok == "-" && !parts.empty() && is_integer(parts.back()) && k + 1 < ids.size() &&
        is_integer(token(ids[k + 1]))) {
      parts.back() += '-' + token(ids[k + 1]);
      ++k;
      continue;
    }
    parts.push_back(tok);
  }
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ' ';
    out += parts[i];
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& tok : tokens_) {
    for (char c : tok) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  return h;
}

}  // namespace fsp
