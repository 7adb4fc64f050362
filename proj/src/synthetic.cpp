#include "fsp/synthetic.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fsp/rng.hpp"

namespace fsp {

using ojson = nlohmann::ordered_json;

namespace {

std::vector<std::vector<std::string>> split_phrases(const std::vector<std::string>& raw) {
  std::vector<std::vector<std::string>> out;
  for (const auto& phrase : raw) {
    std::istringstream in(phrase);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    out.push_back(std::move(words));
  }
  return out;
}

PhrasePool pool(const std::string& name, const std::vector<std::string>& raw) {
  return PhrasePool{name, split_phrases(raw)};
}

TemplatePiece lit(const std::string& words) {
  TemplatePiece p;
  p.kind = TemplatePiece::Kind::Literal;
  std::istringstream in(words);
  std::string w;
  while (in >> w) p.words.push_back(w);
  return p;
}

TemplatePiece trig() {
  TemplatePiece p;
  p.kind = TemplatePiece::Kind::Trigger;
  return p;
}

TemplatePiece slot(const std::string& role, const std::string& pool_name) {
  TemplatePiece p;
  p.kind = TemplatePiece::Kind::Slot;
  p.role = role;
  p.pool = pool_name;
  return p;
}

SentenceTemplate tpl(std::vector<TemplatePiece> pieces, std::vector<std::string> triggers = {}) {
  return SentenceTemplate{std::move(pieces), std::move(triggers)};
}

}  // namespace

GeneratorSpec default_generator_spec() {
  GeneratorSpec spec;
  spec.example_count = 5000;
  spec.role_inventory = {"Agent",  "Theme",      "Goal",    "Source",  "Path",
                         "Time",   "Place",      "Manner",  "Buyer",   "Seller",
                         "Goods",  "Speaker",    "Message", "Ingestor", "Ingestible",
                         "Instrument", "Topic",  "Recipient", "Cognizer", "Cargo"};

  spec.pools = {
      pool("person2", {"the clerk", "the farmer", "the sailor", "the teacher", "the doctor",
                       "the singer", "the mayor", "the guard"}),
      pool("thing2", {"the barrel", "the crate", "the wagon", "the parcel", "the stone",
                      "the kettle", "the ladder", "the anvil"}),
      pool("group2", {"the convoy", "the column", "the caravan", "the patrol", "the herd",
                      "the crowd"}),
      pool("path3", {"across the bridge", "along the river", "through the valley",
                     "past the mill", "around the square", "down the slope"}),
      pool("place3", {"at the harbor", "in the market", "near the station", "behind the barn",
                      "inside the hall", "by the gate"}),
      pool("time3", {"in the morning", "at first light", "after the storm", "during the night",
                     "before the feast", "around midday"}),
      pool("goal3", {"to the depot", "to the village", "into the cellar", "onto the roof",
                     "to the summit", "into the yard"}),
      pool("source3", {"from the depot", "from the attic", "out of the shed", "from the harbor",
                       "off the shelf", "from the vault"}),
      pool("goods2", {"the grain", "the cloth", "the tools", "the spices", "the timber",
                      "the copper"}),
      pool("food2", {"the stew", "the bread", "the apples", "the porridge", "the cheese",
                     "the dumplings"}),
      pool("stuff3", {"with the grain", "with the sand", "with the apples", "with the timber",
                      "with the gravel", "with the coal"}),
      pool("message5", {"that the well was dry", "that the roof had leaked",
                        "that the ship had docked", "that the road was blocked",
                        "that the crop had failed", "that the bell was cracked"}),
      pool("manner3", {"with great care", "in a hurry", "without any fuss", "with loud cheer"}),
      pool("instr3", {"with a rope", "with a shovel", "with a cart", "with a crane"}),
      pool("topic3", {"about the harvest", "about the voyage", "about the wedding",
                      "about the repairs"}),
      pool("seller3", {"from the merchant", "from the peddler", "from the smith",
                       "from the weaver"}),
      pool("buyer3", {"to the merchant", "to the peddler", "to the miller", "to the tailor"}),
  };

  auto period = lit(".");

  // Shared trigger words (moved, shifted, loaded, traded, muttered, got,
  // downed) keep >=25% of the trigger lexicon ambiguous between frames.
  // The "amb" templates of Motion and Self_motion produce byte-identical
  // sentences with different gold labels, an irreducible confusion that
  // keeps held-out frame accuracy strictly below 1.
  FrameSpec motion;
  motion.name = "Motion";
  motion.roles = {"Theme", "Path", "Goal", "Time"};
  motion.triggers = {"rolled", "slid", "moved", "shifted"};
  motion.templates = {
      tpl({slot("Theme", "thing2"), trig(), slot("Path", "path3"), period}),
      tpl({slot("Theme", "thing2"), trig(), slot("Goal", "goal3"), period}),
      tpl({slot("Time", "time3"), slot("Theme", "thing2"), trig(), slot("Path", "path3"), period}),
      tpl({slot("Theme", "thing2"), trig(), slot("Path", "path3"), slot("Time", "time3"), period}),
      tpl({slot("Theme", "group2"), trig(), slot("Path", "path3"), period}, {"moved"}),
  };

  FrameSpec self_motion;
  self_motion.name = "Self_motion";
  self_motion.roles = {"Agent", "Path", "Goal", "Time"};
  self_motion.triggers = {"walked", "marched", "moved"};
  self_motion.templates = {
      tpl({slot("Agent", "person2"), trig(), slot("Path", "path3"), period}),
      tpl({slot("Agent", "person2"), trig(), slot("Goal", "goal3"), slot("Time", "time3"), period}),
      tpl({slot("Agent", "person2"), trig(), slot("Path", "path3"), slot("Time", "time3"), period}),
      tpl({slot("Time", "time3"), slot("Agent", "person2"), trig(), slot("Goal", "goal3"), period}),
      tpl({slot("Agent", "group2"), trig(), slot("Path", "path3"), period}, {"moved"}),
  };

  FrameSpec transport;
  transport.name = "Transport";
  transport.roles = {"Agent", "Theme", "Goal"};
  transport.triggers = {"carried", "hauled", "loaded", "shifted"};
  transport.templates = {
      tpl({slot("Agent", "person2"), trig(), slot("Theme", "thing2"), slot("Goal", "goal3"), period}),
      tpl({slot("Agent", "person2"), trig(), slot("Theme", "goods2"), slot("Goal", "goal3"), period}),
  };

  FrameSpec filling;
  filling.name = "Filling";
  filling.roles = {"Agent", "Goal", "Theme", "Time"};
  filling.triggers = {"filled", "packed", "loaded"};
  filling.templates = {
      tpl({slot("Agent", "person2"), trig(), slot("Goal", "thing2"), slot("Theme", "stuff3"), period}),
      tpl({slot("Agent", "person2"), trig(), slot("Goal", "thing2"), slot("Theme", "stuff3"),
           slot("Time", "time3"), period}),
  };

  FrameSpec buy;
  buy.name = "Commerce_buy";
  buy.roles = {"Buyer", "Goods", "Seller", "Time"};
  buy.triggers = {"bought", "purchased", "traded"};
  buy.templates = {
      tpl({slot("Buyer", "person2"), trig(), slot("Goods", "goods2"), slot("Seller", "seller3"), period}),
      tpl({slot("Buyer", "person2"), trig(), slot("Goods", "goods2"), slot("Time", "time3"), period}),
  };

  FrameSpec sell;
  sell.name = "Commerce_sell";
  sell.roles = {"Seller", "Goods", "Buyer", "Place"};
  sell.triggers = {"sold", "auctioned", "traded"};
  sell.templates = {
      tpl({slot("Seller", "person2"), trig(), slot("Goods", "goods2"), slot("Buyer", "buyer3"), period}),
      tpl({slot("Seller", "person2"), trig(), slot("Goods", "goods2"), slot("Place", "place3"), period}),
  };

  FrameSpec ingestion;
  ingestion.name = "Ingestion";
  ingestion.roles = {"Ingestor", "Ingestible", "Manner"};
  ingestion.triggers = {"ate", "devoured", "downed"};
  ingestion.templates = {
      tpl({slot("Ingestor", "person2"), trig(), slot("Ingestible", "food2"), period}),
      tpl({slot("Ingestor", "person2"), trig(), slot("Ingestible", "food2"), slot("Manner", "manner3"), period}),
  };

  FrameSpec statement;
  statement.name = "Statement";
  statement.roles = {"Speaker", "Message", "Time"};
  statement.triggers = {"said", "muttered"};
  statement.templates = {
      tpl({slot("Speaker", "person2"), trig(), slot("Message", "message5"), period}),
      tpl({slot("Time", "time3"), slot("Speaker", "person2"), trig(), slot("Message", "message5"), period}),
  };

  FrameSpec questioning;
  questioning.name = "Questioning";
  questioning.roles = {"Speaker", "Topic", "Time"};
  questioning.triggers = {"asked", "muttered"};
  questioning.templates = {
      tpl({slot("Speaker", "person2"), trig(), slot("Topic", "topic3"), period}),
      tpl({slot("Speaker", "person2"), trig(), slot("Topic", "topic3"), slot("Time", "time3"), period}),
  };

  FrameSpec arriving;
  arriving.name = "Arriving";
  arriving.roles = {"Theme", "Goal", "Time"};
  arriving.triggers = {"arrived", "got"};
  arriving.templates = {
      tpl({slot("Theme", "person2"), trig(), slot("Goal", "goal3"), slot("Time", "time3"), period}),
      tpl({slot("Theme", "person2"), trig(), slot("Goal", "goal3"), period}),
  };

  FrameSpec departing;
  departing.name = "Departing";
  departing.roles = {"Theme", "Source", "Time"};
  departing.triggers = {"departed", "got"};
  departing.templates = {
      tpl({slot("Theme", "person2"), trig(), slot("Source", "source3"), slot("Time", "time3"), period}),
      tpl({slot("Theme", "person2"), trig(), slot("Source", "source3"), period}),
  };

  FrameSpec emptying;
  emptying.name = "Emptying";
  emptying.roles = {"Agent", "Source", "Instrument"};
  emptying.triggers = {"emptied", "cleared", "downed"};
  emptying.templates = {
      tpl({slot("Agent", "person2"), trig(), slot("Source", "thing2"), period}),
      tpl({slot("Agent", "person2"), trig(), slot("Source", "thing2"), slot("Instrument", "instr3"), period}),
  };

  spec.frames = {motion, self_motion, transport, filling,  buy,      sell,
                 ingestion, statement, questioning, arriving, departing, emptying};
  return spec;
}

void validate_generator_spec(const GeneratorSpec& spec) {
  if (spec.frames.empty()) throw data_error("generator spec has no frames");
  if (spec.frames.size() < 2)
    throw data_error("generator spec needs >=2 frames (trigger-ambiguity requirement unmeetable)");
  if (spec.example_count < 1) throw data_error("generator spec example count must be >= 1");

  std::map<std::string, const PhrasePool*> pools;
  for (const auto& p : spec.pools) {
    if (p.phrases.empty()) throw data_error("phrase pool '" + p.name + "' is empty");
    pools[p.name] = &p;
  }

  std::set<std::string> frame_names;
  std::map<std::string, std::set<std::string>> trigger_frames;
  for (const auto& frame : spec.frames) {
    if (!valid_label(frame.name)) throw data_error("invalid frame name '" + frame.name + "'");
    if (!frame_names.insert(frame.name).second)
      throw data_error("duplicate frame '" + frame.name + "'");
    if (frame.roles.empty() || frame.roles.size() > 4)
      throw data_error("frame '" + frame.name + "' must have 1-4 roles");
    if (frame.templates.empty())
      throw data_error("frame '" + frame.name + "' has no templates");
    if (frame.triggers.empty())
      throw data_error("frame '" + frame.name + "' has no trigger words");
    for (const auto& role : frame.roles) {
      if (std::find(spec.role_inventory.begin(), spec.role_inventory.end(), role) ==
          spec.role_inventory.end())
        throw data_error("frame '" + frame.name + "' uses role '" + role + "' not in inventory");
    }
    for (const auto& t : frame.triggers) trigger_frames[t].insert(frame.name);
    for (const auto& templ : frame.templates) {
      int trigger_pieces = 0;
      for (const auto& piece : templ.pieces) {
        switch (piece.kind) {
          case TemplatePiece::Kind::Trigger:
            ++trigger_pieces;
            break;
          case TemplatePiece::Kind::Slot: {
            if (std::find(frame.roles.begin(), frame.roles.end(), piece.role) == frame.roles.end())
              throw data_error("template slot role '" + piece.role + "' not in frame '" +
                               frame.name + "'");
            auto it = pools.find(piece.pool);
            if (it == pools.end())
              throw data_error("template references unknown pool '" + piece.pool + "'");
            break;
          }
          case TemplatePiece::Kind::Literal:
            for (const auto& w : piece.words)
              if (!valid_token(w)) throw data_error("invalid literal token '" + w + "'");
            break;
        }
      }
      if (trigger_pieces != 1)
        throw data_error("each template must contain exactly one trigger slot");
      for (const auto& t : templ.triggers) trigger_frames[t].insert(frame.name);
    }
  }

  std::size_t shared = 0;
  for (const auto& [word, frames] : trigger_frames) {
    if (!valid_token(word)) throw data_error("invalid trigger word '" + word + "'");
    if (frames.size() >= 2) ++shared;
  }
  if (shared * 4 < trigger_frames.size())
    throw data_error("fewer than 25% of trigger words are shared between frames");
}

Corpus generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  validate_generator_spec(spec);

  std::map<std::string, const PhrasePool*> pools;
  for (const auto& p : spec.pools) pools[p.name] = &p;

  Corpus corpus;
  for (const auto& frame : spec.frames) {
    corpus.ontology.frames.push_back(frame.name);
    corpus.ontology.frame_roles[frame.name] = frame.roles;
  }
  corpus.ontology.roles = spec.role_inventory;

  std::mt19937_64 rng(seed);
  for (int i = 0; i < spec.example_count; ++i) {
    const FrameSpec& frame = spec.frames[uniform_below(rng, spec.frames.size())];
    const SentenceTemplate& templ = frame.templates[uniform_below(rng, frame.templates.size())];
    const auto& lexicon = templ.triggers.empty() ? frame.triggers : templ.triggers;
    const std::string& trigger_word = lexicon[uniform_below(rng, lexicon.size())];

    AnnotatedExample ex;
    ex.frame = frame.name;
    for (const auto& piece : templ.pieces) {
      const int at = static_cast<int>(ex.tokens.size());
      switch (piece.kind) {
        case TemplatePiece::Kind::Literal:
          ex.tokens.insert(ex.tokens.end(), piece.words.begin(), piece.words.end());
          break;
        case TemplatePiece::Kind::Trigger:
          ex.tokens.push_back(trigger_word);
          ex.trigger = TokenSpan{at, at};
          break;
        case TemplatePiece::Kind::Slot: {
          const PhrasePool& p = *pools.at(piece.pool);
          const auto& phrase = p.phrases[uniform_below(rng, p.phrases.size())];
          ex.tokens.insert(ex.tokens.end(), phrase.begin(), phrase.end());
          ex.roles.push_back(RoleAssignment{
              piece.role, TokenSpan{at, at + static_cast<int>(phrase.size()) - 1}});
          break;
        }
      }
    }
    validate_example(ex, &corpus.ontology);
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

std::string generator_spec_to_json(const GeneratorSpec& spec) {
  ojson j;
  j["example_count"] = spec.example_count;
  j["roles"] = spec.role_inventory;
  ojson pools = ojson::array();
  for (const auto& p : spec.pools) {
    ojson jp;
    jp["name"] = p.name;
    ojson phrases = ojson::array();
    for (const auto& phrase : p.phrases) {
      std::string joined;
      for (std::size_t i = 0; i < phrase.size(); ++i) {
        if (i) joined += ' ';
        joined += phrase[i];
      }
      phrases.push_back(joined);
    }
    jp["phrases"] = std::move(phrases);
    pools.push_back(std::move(jp));
  }
  j["pools"] = std::move(pools);

  ojson frames = ojson::array();
  for (const auto& frame : spec.frames) {
    ojson jf;
    jf["name"] = frame.name;
    jf["roles"] = frame.roles;
    jf["triggers"] = frame.triggers;
    ojson templates = ojson::array();
    for (const auto& templ : frame.templates) {
      ojson jt;
      ojson pieces = ojson::array();
      for (const auto& piece : templ.pieces) {
        ojson jp;
        switch (piece.kind) {
          case TemplatePiece::Kind::Literal: {
            std::string joined;
            for (std::size_t i = 0; i < piece.words.size(); ++i) {
              if (i) joined += ' ';
              joined += piece.words[i];
            }
            jp["literal"] = joined;
            break;
          }
          case TemplatePiece::Kind::Trigger:
            jp["trigger"] = true;
            break;
          case TemplatePiece::Kind::Slot:
            jp["role"] = piece.role;
            jp["pool"] = piece.pool;
            break;
        }
        pieces.push_back(std::move(jp));
      }
      jt["pieces"] = std::move(pieces);
      if (!templ.triggers.empty()) jt["triggers"] = templ.triggers;
      templates.push_back(std::move(jt));
    }
    jf["templates"] = std::move(templates);
    frames.push_back(std::move(jf));
  }
  j["frames"] = std::move(frames);
  return j.dump(2);
}

GeneratorSpec generator_spec_from_json(const std::string& text) {
  ojson j = ojson::parse(text, nullptr, false);
  if (j.is_discarded()) throw data_error("malformed generator spec JSON");
  GeneratorSpec spec;
  try {
    spec.example_count = j.at("example_count").get<int>();
    spec.role_inventory = j.at("roles").get<std::vector<std::string>>();
    for (const ojson& jp : j.at("pools")) {
      PhrasePool p;
      p.name = jp.at("name").get<std::string>();
      p.phrases = split_phrases(jp.at("phrases").get<std::vector<std::string>>());
      spec.pools.push_back(std::move(p));
    }
    for (const ojson& jf : j.at("frames")) {
      FrameSpec frame;
      frame.name = jf.at("name").get<std::string>();
      frame.roles = jf.at("roles").get<std::vector<std::string>>();
      frame.triggers = jf.at("triggers").get<std::vector<std::string>>();
      for (const ojson& jt : jf.at("templates")) {
        SentenceTemplate templ;
        for (const ojson& jp : jt.at("pieces")) {
          TemplatePiece piece;
          if (jp.contains("literal")) {
            piece.kind = TemplatePiece::Kind::Literal;
            piece.words = split_phrases({jp["literal"].get<std::string>()})[0];
          } else if (jp.contains("trigger")) {
            piece.kind = TemplatePiece::Kind::Trigger;
          } else {
            piece.kind = TemplatePiece::Kind::Slot;
            piece.role = jp.at("role").get<std::string>();
            piece.pool = jp.at("pool").get<std::string>();
          }
          templ.pieces.push_back(std::move(piece));
        }
        if (jt.contains("triggers"))
          templ.triggers = jt["triggers"].get<std::vector<std::string>>();
        frame.templates.push_back(std::move(templ));
      }
      spec.frames.push_back(std::move(frame));
    }
  } catch (const ojson::exception& e) {
    throw data_error(std::string("bad generator spec: ") + e.what());
  }
  return spec;
}

}  // namespace fsp
