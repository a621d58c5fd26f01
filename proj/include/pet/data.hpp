#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingSegmentError : Error {
  using Error::Error;
};

struct UnknownLabelError : Error {
  using Error::Error;
};

// One classification input: one or two text segments and an optional gold
// label (an index into the owning task's label list).
struct InputExample {
  std::string example_id;
  std::string text_a;
  std::optional<std::string> text_b;
  std::optional<int> label;

  bool has_label() const { return label.has_value(); }
};

using Dataset = std::vector<InputExample>;

// An unlabeled input annotated with a distribution over labels; the
// distillation target for the final classifier.
struct SoftLabeledExample {
  InputExample example;
  std::vector<double> target;
};

// Plain rendering for the final classifier: no pattern, segments joined by
// a single space.
std::string render_raw(const InputExample& example);

// Pair rendering for generation prompts: "a <sep> b" (single-segment inputs
// render as just "a").
std::string render_with_separator(const InputExample& example, std::string_view separator);

// Maximal runs of [A-Za-z0-9_'] — the word units used by the mock backends'
// keyword tables.
std::vector<std::string> tokenize_words(std::string_view text);

// Line-delimited dataset files. Each line is a JSON object with text_a,
// optional text_b, optional label (a label string from the task pack) and
// optional example_id (assigned from the line number when absent).
Dataset load_dataset_jsonl(const std::filesystem::path& path,
                           const std::vector<std::string>& labels);
void save_dataset_jsonl(const std::filesystem::path& path, const Dataset& data,
                        const std::vector<std::string>& labels);

// Soft-label audit file: one line per example (example_id, target vector).
void save_soft_labels_jsonl(const std::filesystem::path& path,
                            const std::vector<SoftLabeledExample>& soft);
std::vector<std::pair<std::string, std::vector<double>>> load_soft_labels_jsonl(
    const std::filesystem::path& path);

std::vector<int> gold_labels(const Dataset& data);  // throws if any example unlabeled

}  // namespace pet
