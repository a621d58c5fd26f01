#include "pet/pvp.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pet/rng.hpp"

namespace pet {

std::string to_string(PatternCategory category) {
  switch (category) {
    case PatternCategory::Null: return "NULL";
    case PatternCategory::Punc: return "PUNC";
    case PatternCategory::Prompt: return "PROMPT";
    case PatternCategory::QA: return "QA";
    case PatternCategory::Noise: return "NOISE";
  }
  throw Error("invalid pattern category");
}

PatternCategory pattern_category_from_string(const std::string& s) {
  if (s == "NULL") return PatternCategory::Null;
  if (s == "PUNC") return PatternCategory::Punc;
  if (s == "PROMPT") return PatternCategory::Prompt;
  if (s == "QA") return PatternCategory::QA;
  if (s == "NOISE") return PatternCategory::Noise;
  throw Error("unknown pattern category: " + s);
}

std::string to_string(Metric metric) {
  return metric == Metric::Accuracy ? "accuracy" : "macro_f1";
}

Metric metric_from_string(const std::string& s) {
  if (s == "accuracy") return Metric::Accuracy;
  if (s == "macro_f1") return Metric::MacroF1;
  throw Error("unknown metric: " + s);
}

namespace {

struct TemplatePiece {
  enum class Kind { Literal, SegmentA, SegmentB, Mask, LabelSlot } kind;
  std::string literal;
};

std::vector<TemplatePiece> parse_template(const std::string& tmpl) {
  std::vector<TemplatePiece> pieces;
  std::string literal;
  std::size_t i = 0;
  auto flush = [&] {
    if (!literal.empty()) {
      pieces.push_back({TemplatePiece::Kind::Literal, literal});
      literal.clear();
    }
  };
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close == std::string::npos) throw Error("unterminated placeholder in template: " + tmpl);
      const std::string name = tmpl.substr(i + 1, close - i - 1);
      flush();
      if (name == "a") {
        pieces.push_back({TemplatePiece::Kind::SegmentA, {}});
      } else if (name == "b") {
        pieces.push_back({TemplatePiece::Kind::SegmentB, {}});
      } else if (name == "mask") {
        pieces.push_back({TemplatePiece::Kind::Mask, {}});
      } else if (name == "label") {
        pieces.push_back({TemplatePiece::Kind::LabelSlot, {}});
      } else {
        throw Error("unknown placeholder {" + name + "} in template: " + tmpl);
      }
      i = close + 1;
    } else {
      literal.push_back(tmpl[i]);
      ++i;
    }
  }
  flush();
  return pieces;
}

int count_kind(const std::vector<TemplatePiece>& pieces, TemplatePiece::Kind kind) {
  return static_cast<int>(
      std::count_if(pieces.begin(), pieces.end(),
                    [&](const TemplatePiece& p) { return p.kind == kind; }));
}

}  // namespace

bool Pattern::uses_text_b() const {
  const auto pieces = parse_template(template_text);
  return count_kind(pieces, TemplatePiece::Kind::SegmentB) > 0;
}

bool Pattern::uses_label_slot() const {
  const auto pieces = parse_template(template_text);
  return count_kind(pieces, TemplatePiece::Kind::LabelSlot) > 0;
}

void Verbalizer::validate(std::size_t num_labels) const {
  if (verbalizations.size() != num_labels) {
    throw Error("verbalizer is not total: " + std::to_string(verbalizations.size()) +
                " entries for " + std::to_string(num_labels) + " labels");
  }
  std::set<std::string> seen;
  for (const auto& v : verbalizations) {
    if (!seen.insert(v).second) {
      throw Error("verbalizer is not injective: duplicate verbalization \"" + v + "\"");
    }
  }
}

std::string apply_pattern(const Pattern& pattern, const InputExample& example) {
  const auto pieces = parse_template(pattern.template_text);
  if (count_kind(pieces, TemplatePiece::Kind::Mask) != 1) {
    throw Error("pattern " + pattern.pattern_id + " does not have exactly one mask slot");
  }
  std::string out;
  for (const auto& piece : pieces) {
    switch (piece.kind) {
      case TemplatePiece::Kind::Literal: out += piece.literal; break;
      case TemplatePiece::Kind::SegmentA: out += example.text_a; break;
      case TemplatePiece::Kind::SegmentB:
        if (!example.text_b) {
          throw MissingSegmentError("pattern " + pattern.pattern_id +
                                    " references {b} but example " + example.example_id +
                                    " has a single segment");
        }
        out += *example.text_b;
        break;
      case TemplatePiece::Kind::Mask: out += kMaskToken; break;
      case TemplatePiece::Kind::LabelSlot:
        throw Error("pattern " + pattern.pattern_id +
                    " still carries an unsubstituted {label} slot");
    }
  }
  return out;
}

const std::string& verbalize(const Verbalizer& verbalizer, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= verbalizer.verbalizations.size()) {
    throw UnknownLabelError("label index " + std::to_string(label) +
                            " outside the verbalizer's label set");
  }
  return verbalizer.verbalizations[static_cast<std::size_t>(label)];
}

SingleTokenReport validate_single_token(const PatternVerbalizerPair& pvp,
                                        const TokenInventory& vocab) {
  SingleTokenReport report;
  for (std::size_t i = 0; i < pvp.verbalizer.verbalizations.size(); ++i) {
    const auto& v = pvp.verbalizer.verbalizations[i];
    if (!vocab.is_single_token(v)) {
      report.not_single_token.push_back({static_cast<int>(i), v});
    }
  }
  return report;
}

Pattern make_noise_pattern(const TokenInventory& vocab, std::uint64_t seed,
                           int segment_count) {
  if (segment_count != 1 && segment_count != 2) {
    throw Error("noise patterns support 1 or 2 segments");
  }
  if (vocab.non_special().empty()) throw Error("empty token inventory");

  Rng rng(mix_seed(seed, "noise-pattern"));
  const auto& pool = vocab.non_special();
  auto draw_tokens = [&](int count) {
    std::vector<std::string> toks;
    for (int i = 0; i < count; ++i) {
      toks.push_back(pool[static_cast<std::size_t>(rng.next_below(pool.size()))]);
    }
    return toks;
  };

  std::vector<std::string> parts;
  for (auto& t : draw_tokens(rng.uniform_int(0, 3))) parts.push_back(std::move(t));
  if (segment_count == 1) {
    parts.push_back("{a}");
  } else {
    const bool swap_order = rng.coin();
    parts.push_back(swap_order ? "{b}" : "{a}");
    for (auto& t : draw_tokens(rng.uniform_int(0, 3))) parts.push_back(std::move(t));
    parts.push_back(swap_order ? "{a}" : "{b}");
  }
  for (auto& t : draw_tokens(rng.uniform_int(0, 3))) parts.push_back(std::move(t));
  parts.push_back("{mask}");

  std::string tmpl;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) tmpl += " ";
    tmpl += parts[i];
  }

  Pattern p;
  std::ostringstream id;
  id << "noise-" << std::hex << seed;
  p.pattern_id = id.str();
  p.template_text = tmpl;
  p.category = PatternCategory::Noise;
  return p;
}

Verbalizer make_noise_verbalizer(const TokenInventory& vocab, std::uint64_t seed,
                                 std::size_t num_labels) {
  if (num_labels == 0) throw Error("noise verbalizer needs a non-empty label set");
  const auto& pool = vocab.non_special();
  if (pool.size() < num_labels) {
    throw Error("token inventory too small for an injective verbalizer");
  }
  Rng rng(mix_seed(seed, "noise-verbalizer"));
  Verbalizer v;
  std::set<std::string> used;
  while (v.verbalizations.size() < num_labels) {
    const auto& tok = pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
    if (used.insert(tok).second) v.verbalizations.push_back(tok);
  }
  return v;
}

namespace {

Verbalizer verbalizer_from_json(const nlohmann::json& j,
                                const std::vector<std::string>& labels) {
  Verbalizer v;
  v.verbalizations.reserve(labels.size());
  for (const auto& label : labels) {
    if (!j.contains(label)) {
      throw Error("verbalizer is missing an entry for label \"" + label + "\"");
    }
    v.verbalizations.push_back(j.at(label).get<std::string>());
  }
  return v;
}

nlohmann::json verbalizer_to_json(const Verbalizer& v,
                                  const std::vector<std::string>& labels) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) j[labels[i]] = v.verbalizations[i];
  return j;
}

}  // namespace

TaskPack TaskPack::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open task pack: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }

  TaskPack pack;
  pack.task_name = j.at("task_name").get<std::string>();
  pack.description = j.value("description", std::string{});
  pack.labels = j.at("labels").get<std::vector<std::string>>();
  pack.metric = metric_from_string(j.value("metric", std::string{"accuracy"}));
  pack.binary_scheme = j.value("binary_scheme", false);

  const nlohmann::json* default_verbalizer =
      j.contains("verbalizer") ? &j.at("verbalizer") : nullptr;
  const auto& verbalizer_labels =
      pack.binary_scheme ? std::vector<std::string>{"False", "True"} : pack.labels;

  for (const auto& jp : j.at("pvps")) {
    PatternVerbalizerPair pvp;
    pvp.pvp_id = jp.at("pvp_id").get<std::string>();
    const auto& jpat = jp.at("pattern");
    pvp.pattern.pattern_id = jpat.value("pattern_id", pvp.pvp_id);
    pvp.pattern.template_text = jpat.at("template").get<std::string>();
    pvp.pattern.category = pattern_category_from_string(jpat.at("category").get<std::string>());
    if (jpat.contains("question")) pvp.pattern.question = jpat.at("question").get<std::string>();
    if (jp.contains("verbalizer")) {
      pvp.verbalizer = verbalizer_from_json(jp.at("verbalizer"), verbalizer_labels);
    } else if (default_verbalizer) {
      pvp.verbalizer = verbalizer_from_json(*default_verbalizer, verbalizer_labels);
    } else {
      throw Error("pvp " + pvp.pvp_id + " has no verbalizer and the pack has no default");
    }
    pack.pvps.push_back(std::move(pvp));
  }
  pack.validate();
  return pack;
}

void TaskPack::save(const std::filesystem::path& path) const {
  validate();
  nlohmann::json j;
  j["task_name"] = task_name;
  j["description"] = description;
  j["labels"] = labels;
  j["metric"] = to_string(metric);
  if (binary_scheme) j["binary_scheme"] = true;
  const auto& verbalizer_labels =
      binary_scheme ? std::vector<std::string>{"False", "True"} : labels;
  j["pvps"] = nlohmann::json::array();
  for (const auto& pvp : pvps) {
    nlohmann::json jp;
    jp["pvp_id"] = pvp.pvp_id;
    jp["pattern"]["template"] = pvp.pattern.template_text;
    jp["pattern"]["category"] = to_string(pvp.pattern.category);
    if (pvp.pattern.question) jp["pattern"]["question"] = *pvp.pattern.question;
    jp["verbalizer"] = verbalizer_to_json(pvp.verbalizer, verbalizer_labels);
    j["pvps"].push_back(std::move(jp));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write task pack: " + path.string());
  out << j.dump(2) << "\n";
}

void TaskPack::validate() const {
  if (labels.empty()) throw Error("task pack " + task_name + " has an empty label set");
  if (pvps.empty()) throw Error("task pack " + task_name + " has no PVPs");
  const std::size_t verbalizer_size = binary_scheme ? 2 : labels.size();

  std::set<std::string> ids;
  for (const auto& pvp : pvps) {
    if (!ids.insert(pvp.pvp_id).second) {
      throw Error("duplicate pvp_id \"" + pvp.pvp_id + "\" in task pack " + task_name);
    }
    pvp.verbalizer.validate(verbalizer_size);
    const auto pieces = parse_template(pvp.pattern.template_text);
    if (count_kind(pieces, TemplatePiece::Kind::Mask) != 1) {
      throw Error("pvp " + pvp.pvp_id + " must have exactly one {mask} slot");
    }
    const bool has_label_slot = count_kind(pieces, TemplatePiece::Kind::LabelSlot) > 0;
    if (binary_scheme && !has_label_slot) {
      throw Error("binary-scheme pvp " + pvp.pvp_id + " must carry a {label} slot");
    }
    if (!binary_scheme && has_label_slot) {
      throw Error("pvp " + pvp.pvp_id + " carries a {label} slot outside a binary scheme");
    }
  }
}

int TaskPack::label_index(const std::string& name) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace pet
