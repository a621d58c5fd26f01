#include "pet/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "pet/rng.hpp"
#include "pet/training.hpp"

namespace pet {

void GenerationConfig::validate() const {
  if (top_p <= 0.0 || top_p > 1.0) throw Error("top_p must be in (0, 1]");
  if (max_new_tokens < 1) throw Error("max_new_tokens must be at least 1");
  if (in_context_count != 1 && in_context_count != 2) {
    throw Error("in_context_count must be 1 or 2");
  }
  if (target_count == 0) throw Error("target_count must be positive");
  if (pair_separator.empty()) throw Error("pair_separator must be non-empty");
  if (min_acceptance_rate < 0 || min_acceptance_rate > 1) {
    throw Error("min_acceptance_rate must be in [0, 1]");
  }
}

std::string build_generation_prompt(const std::vector<InputExample>& examples,
                                    const GenerationConfig& config) {
  if (examples.empty() || examples.size() > 2) {
    throw Error("build_generation_prompt takes one or two examples");
  }
  std::string prompt;
  std::size_t k = 1;
  for (const auto& ex : examples) {
    prompt += "Example " + std::to_string(k) + ": ";
    prompt += render_with_separator(ex, config.pair_separator);
    prompt += "\n\n";
    ++k;
  }
  prompt += "Example " + std::to_string(k) + ":";
  return prompt;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

std::optional<std::pair<std::string, std::optional<std::string>>> filter_continuation(
    const std::string& text, bool pair_task, const GenerationConfig& config,
    RejectionStats& stats) {
  const auto stop = text.find(config.stop_sequence);
  if (stop == std::string::npos) {
    ++stats.no_terminator;
    return std::nullopt;
  }
  const std::string body = trim(text.substr(0, stop));

  if (pair_task) {
    const std::size_t separators = count_occurrences(body, config.pair_separator);
    if (separators == 0) {
      ++stats.missing_separator;
      return std::nullopt;
    }
    if (separators > 1) {
      ++stats.multiple_separator;
      return std::nullopt;
    }
    const auto pos = body.find(config.pair_separator);
    const std::string first = trim(body.substr(0, pos));
    const std::string second = trim(body.substr(pos + config.pair_separator.size()));
    if (first.empty() || second.empty()) {
      ++stats.empty_text;
      return std::nullopt;
    }
    return std::make_pair(first, std::optional<std::string>{second});
  }

  if (body.find(config.pair_separator) != std::string::npos) {
    ++stats.stray_separator;
    return std::nullopt;
  }
  if (body.empty()) {
    ++stats.empty_text;
    return std::nullopt;
  }
  return std::make_pair(body, std::optional<std::string>{});
}

Dataset generate_corpus(GenerativeBackend& backend, const Dataset& train,
                        const GenerationConfig& config, std::uint64_t seed,
                        RejectionStats* stats_out) {
  config.validate();
  if (train.empty()) throw Error("generate_corpus: empty training set");
  const bool pair_task = train.front().text_b.has_value();
  for (const auto& ex : train) {
    if (ex.text_b.has_value() != pair_task) {
      throw Error("generate_corpus: mixed single/pair examples in the training set");
    }
  }

  RejectionStats stats;
  std::set<std::string> seen;
  Rng picker(mix_seed(seed, "in-context"));

  Dataset corpus;
  corpus.reserve(config.target_count);
  std::size_t window_attempts = 0;
  std::size_t window_accepted = 0;

  while (corpus.size() < config.target_count) {
    ++stats.attempts;
    ++window_attempts;

    std::vector<InputExample> context;
    for (int i = 0; i < config.in_context_count; ++i) {
      context.push_back(train[static_cast<std::size_t>(picker.next_below(train.size()))]);
    }
    const std::string prompt = build_generation_prompt(context, config);
    const auto tokens = backend.sample_continuation(prompt, config.top_p,
                                                    config.max_new_tokens,
                                                    mix_seed(seed, "sample", stats.attempts));
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) text += " ";
      text += tokens[i];
    }

    auto accepted = filter_continuation(text, pair_task, config, stats);
    if (accepted) {
      ++stats.accepted;
      ++window_accepted;
      InputExample ex;
      ex.example_id = "synth-" + std::to_string(stats.accepted);
      ex.text_a = accepted->first;
      ex.text_b = accepted->second;
      if (!seen.insert(render_raw(ex)).second) ++stats.duplicates;
      corpus.push_back(std::move(ex));
    }

    if (window_attempts >= config.acceptance_window) {
      const double rate =
          static_cast<double>(window_accepted) / static_cast<double>(window_attempts);
      if (rate < config.min_acceptance_rate) {
        if (stats_out) *stats_out = stats;
        throw Error("generate_corpus: acceptance rate " + std::to_string(rate) +
                    " fell below the floor after " + std::to_string(stats.attempts) +
                    " attempts");
      }
      window_attempts = 0;
      window_accepted = 0;
    }
  }
  if (stats_out) *stats_out = stats;
  return corpus;
}

Dataset balance_corpus(const std::vector<PvpModel>& models, const EnsembleWeights& weights,
                       const Dataset& corpus, std::size_t num_labels, BalanceStats* stats_out) {
  if (corpus.empty()) throw Error("balance_corpus: empty corpus");
  const auto predictions = soft_label(models, weights, corpus);

  struct Scored {
    std::size_t corpus_index;
    double confidence;
  };
  std::vector<std::vector<Scored>> per_label(num_labels);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& target = predictions[i].target;
    const auto arg = static_cast<std::size_t>(
        std::max_element(target.begin(), target.end()) - target.begin());
    per_label[arg].push_back({i, target[arg]});
  }

  BalanceStats stats;
  stats.label_counts.resize(num_labels);
  std::size_t keep = corpus.size();
  for (std::size_t l = 0; l < num_labels; ++l) {
    stats.label_counts[l] = per_label[l].size();
    keep = std::min(keep, per_label[l].size());
  }
  stats.keep_per_label = keep;
  if (stats_out) *stats_out = stats;
  if (keep == 0) {
    std::string counts;
    for (std::size_t l = 0; l < num_labels; ++l) {
      if (l) counts += ",";
      counts += std::to_string(stats.label_counts[l]);
    }
    throw Error("balance_corpus: some label has no examples (argmax counts: " + counts + ")");
  }

  Dataset out;
  out.reserve(keep * num_labels);
  for (std::size_t l = 0; l < num_labels; ++l) {
    auto& bucket = per_label[l];
    std::stable_sort(bucket.begin(), bucket.end(), [&](const Scored& a, const Scored& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return predictions[a.corpus_index].example.example_id <
             predictions[b.corpus_index].example.example_id;
    });
    for (std::size_t i = 0; i < keep; ++i) {
      out.push_back(predictions[bucket[i].corpus_index].example);
    }
  }
  return out;
}

void save_corpus(const std::filesystem::path& dir, const Dataset& corpus,
                 const GenerationConfig& config, std::uint64_t seed,
                 const RejectionStats& stats) {
  std::filesystem::create_directories(dir);
  save_dataset_jsonl(dir / "corpus.jsonl", corpus, {});

  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["config"] = {{"top_p", config.top_p},
                        {"max_new_tokens", config.max_new_tokens},
                        {"in_context_count", config.in_context_count},
                        {"target_count", config.target_count},
                        {"pair_separator", config.pair_separator}};
  manifest["rejection_stats"] = {{"attempts", stats.attempts},
                                 {"accepted", stats.accepted},
                                 {"no_terminator", stats.no_terminator},
                                 {"missing_separator", stats.missing_separator},
                                 {"multiple_separator", stats.multiple_separator},
                                 {"stray_separator", stats.stray_separator},
                                 {"empty_text", stats.empty_text},
                                 {"duplicates", stats.duplicates}};
  std::ofstream out(dir / "corpus_manifest.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace pet
