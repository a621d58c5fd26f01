#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pet/backend.hpp"
#include "pet/data.hpp"
#include "pet/distill.hpp"

namespace pet {

struct GenerationConfig {
  double top_p = 0.9;
  int max_new_tokens = 128;
  int in_context_count = 2;  // 1 or 2
  std::size_t target_count = 10000;
  std::string pair_separator = "+++";
  std::string stop_sequence = "\n\n";
  double min_acceptance_rate = 0.01;   // abort floor
  std::size_t acceptance_window = 1000;

  void validate() const;
};

// "Example 1: <x1>\n\nExample 2: <x2>\n\nExample 3:" — in-context examples
// numbered from 1, the prompt ending in the next header. Text pairs are
// joined with " +++ ".
std::string build_generation_prompt(const std::vector<InputExample>& examples,
                                    const GenerationConfig& config = {});

struct RejectionStats {
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  std::size_t no_terminator = 0;
  std::size_t missing_separator = 0;
  std::size_t multiple_separator = 0;
  std::size_t stray_separator = 0;  // separator in a single-text task
  std::size_t empty_text = 0;
  std::size_t duplicates = 0;  // duplicates are kept, only counted
};

// Accept/reject rule applied to one raw continuation (tokens already joined
// into text). Returns the example's segments when accepted.
std::optional<std::pair<std::string, std::optional<std::string>>> filter_continuation(
    const std::string& text, bool pair_task, const GenerationConfig& config,
    RejectionStats& stats);

// Samples continuations until target_count examples pass the filter rules:
// a double line break within max_new_tokens and, for pair tasks, exactly
// one separator. Aborts when the acceptance rate over a 1,000-sample window
// falls below the floor.
Dataset generate_corpus(GenerativeBackend& backend, const Dataset& train,
                        const GenerationConfig& config, std::uint64_t seed,
                        RejectionStats* stats = nullptr);

struct BalanceStats {
  std::vector<std::size_t> label_counts;  // argmax counts before balancing
  std::size_t keep_per_label = 0;
};

// Labels the corpus by ensemble argmax and keeps the most confident
// examples per label, as many as the scarcest label provides; the result
// has exactly equal per-label counts.
Dataset balance_corpus(const std::vector<PvpModel>& models, const EnsembleWeights& weights,
                       const Dataset& corpus, std::size_t num_labels,
                       BalanceStats* stats = nullptr);

// Corpus file plus a provenance manifest (seed, config, rejection stats).
void save_corpus(const std::filesystem::path& dir, const Dataset& corpus,
                 const GenerationConfig& config, std::uint64_t seed,
                 const RejectionStats& stats);

}  // namespace pet
