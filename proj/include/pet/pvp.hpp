#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pet/data.hpp"
#include "pet/vocab.hpp"

namespace pet {

inline constexpr std::string_view kMaskToken = "[MASK]";

// Instruction taxonomy. Noise is reserved for the randomly generated
// robustness patterns, which sit outside the four manual groups.
enum class PatternCategory { Null, Punc, Prompt, QA, Noise };

std::string to_string(PatternCategory category);
PatternCategory pattern_category_from_string(const std::string& s);

// A plain-text template with named placeholders: {a} and {b} for the input
// segments and exactly one {mask} slot. Binary-scheme templates (many-label
// tasks) may additionally carry a {label} slot that is substituted before
// use.
struct Pattern {
  std::string pattern_id;
  std::string template_text;
  PatternCategory category = PatternCategory::Null;
  std::optional<std::string> question;  // the Q&A question, when category == QA

  bool uses_text_b() const;
  bool uses_label_slot() const;
};

// Total, injective map from label index to a verbalization string, aligned
// with the owning task's label order.
struct Verbalizer {
  std::vector<std::string> verbalizations;

  void validate(std::size_t num_labels) const;
};

struct PatternVerbalizerPair {
  Pattern pattern;
  Verbalizer verbalizer;
  std::string pvp_id;
};

enum class Metric { Accuracy, MacroF1 };

std::string to_string(Metric metric);
Metric metric_from_string(const std::string& s);

// The shippable unit per task: description, label set, PVP inventory.
struct TaskPack {
  std::string task_name;
  std::string description;  // the task description text; may be empty
  std::vector<std::string> labels;
  Metric metric = Metric::Accuracy;
  std::vector<PatternVerbalizerPair> pvps;
  // Many-label binary reformulation: templates carry a {label} slot and the
  // verbalizers map the two polarity labels {False, True}.
  bool binary_scheme = false;

  static TaskPack load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  void validate() const;
  int label_index(const std::string& name) const;  // -1 when absent
};

// Renders the cloze string: placeholders replaced, segments verbatim,
// exactly one "[MASK]". Throws MissingSegmentError if the template wants
// {b} and the example has none.
std::string apply_pattern(const Pattern& pattern, const InputExample& example);

// mapping[label]; throws UnknownLabelError for an out-of-range label.
const std::string& verbalize(const Verbalizer& verbalizer, int label);

// Non-throwing usability check against a backend's token inventory.
struct SingleTokenReport {
  struct Item {
    int label;
    std::string verbalization;
  };
  std::vector<Item> not_single_token;

  bool ok() const { return not_single_token.empty(); }
};

SingleTokenReport validate_single_token(const PatternVerbalizerPair& pvp,
                                        const TokenInventory& vocab);

// Intentionally uninformative pattern: 0-3 uniformly sampled vocabulary
// tokens before and after the input (and, for two segments, a shuffled
// segment order with 0-3 tokens in between); the mask slot goes after the
// noise suffix. Deterministic in the seed.
Pattern make_noise_pattern(const TokenInventory& vocab, std::uint64_t seed,
                           int segment_count);

// Uniformly sampled single-token verbalizations, resampled until injective.
Verbalizer make_noise_verbalizer(const TokenInventory& vocab, std::uint64_t seed,
                                 std::size_t num_labels);

}  // namespace pet
