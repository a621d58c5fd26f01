#include "pet/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "pet/data.hpp"
#include "pet/pvp.hpp"
#include "pet/rng.hpp"

namespace pet {

namespace {

int count_mask_tokens(const std::string& cloze) {
  int count = 0;
  std::size_t pos = 0;
  while ((pos = cloze.find(kMaskToken, pos)) != std::string::npos) {
    ++count;
    pos += kMaskToken.size();
  }
  return count;
}

std::set<std::string> distinct_words(const std::string& text) {
  auto words = tokenize_words(text);
  return {words.begin(), words.end()};
}

std::vector<double> softmax_of(const std::vector<double>& scores) {
  double max_score = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - max_score);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace

TokenInventory default_mock_vocab() {
  // Filler and keyword words used by fixtures, every shipped verbalization,
  // and a handful of prompt words, so that validate_single_token passes for
  // the bundled task packs.
  std::vector<std::string> tokens = {
      // sentiment / review keywords
      "enjoyed", "loved", "great", "good", "fine", "okay", "bad", "awful", "terrible",
      "boring", "amazing", "poor", "mediocre", "wonderful", "horrible", "disappointing",
      "delicious", "friendly", "slow", "rude", "fresh", "stale", "cozy", "dirty",
      // topic keywords
      "election", "government", "president", "war", "team", "match", "season", "coach",
      "league", "stocks", "market", "profit", "company", "bank", "software", "internet",
      "science", "research", "space", "chip", "phone", "computer", "health", "doctor",
      "school", "teacher", "music", "movie", "family", "politics", "food", "service",
      "restaurant", "place", "hotel", "game", "player", "economy", "trade", "energy",
      // function words
      "I", "you", "it", "the", "a", "an", "of", "to", "and", "in", "on", "was", "is",
      "are", "this", "that", "my", "we", "they", "really", "very", "not", "no", "so",
      "with", "for", "at", "had", "have", "but", "all", "just", "too", "never", "again",
      // verbalizations for the bundled packs
      "World", "Sports", "Business", "Tech", "Society", "Science", "Health", "Education",
      "Computer", "Entertainment", "Relationship", "Politics", "Yes", "No", "True", "False",
      "elementary", "intermediate", "advanced", "university", "institute",
      // prompt framing words
      "Question", "Answer", "Category", "Class", "Topic", "Theme", "News", "Example",
  };
  return TokenInventory(std::move(tokens), {"[MASK]", "[PAD]", "[UNK]"});
}

MockMaskedLM::MockMaskedLM(MockLMConfig config, std::uint64_t seed)
    : config_(std::move(config)), weights_(config_.prior), seed_(seed) {}

double MockMaskedLM::score_one(const std::vector<std::string>& words,
                               const std::string& candidate) const {
  auto row = weights_.find(candidate);
  if (row == weights_.end()) return 0.0;
  double score = 0;
  for (const auto& w : words) {
    auto it = row->second.find(w);
    if (it != row->second.end()) score += it->second;
  }
  return score;
}

std::vector<double> MockMaskedLM::score_mask(const std::string& cloze,
                                             const std::vector<std::string>& candidates) {
  ++score_mask_calls_;
  const int masks = count_mask_tokens(cloze);
  if (masks != 1) {
    throw Error("cloze must contain exactly one mask token, found " + std::to_string(masks));
  }
  const auto word_set = distinct_words(cloze);
  const std::vector<std::string> words(word_set.begin(), word_set.end());
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (!config_.vocab.is_single_token(c)) {
      throw Error("candidate \"" + c + "\" is not a single vocabulary token");
    }
    scores.push_back(score_one(words, c));
  }
  return scores;
}

double MockMaskedLM::train_step(const std::vector<MaskedLmExample>& batch,
                                double learning_rate) {
  if (batch.empty()) throw Error("empty training batch");
  const double step = config_.base_step * (learning_rate / config_.reference_lr);
  const bool rigged = config_.underfit_seeds.count(seed_) != 0;

  // Candidate set for the softmax: every token the table knows plus the
  // batch targets.
  std::set<std::string> candidate_set;
  for (const auto& row : weights_) candidate_set.insert(row.first);
  for (const auto& ex : batch) candidate_set.insert(ex.target_token);
  const std::vector<std::string> candidates(candidate_set.begin(), candidate_set.end());

  double loss = 0;
  for (const auto& ex : batch) {
    const auto word_set = distinct_words(ex.cloze);
    const std::vector<std::string> words(word_set.begin(), word_set.end());
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& c : candidates) scores.push_back(score_one(words, c));
    const auto p = softmax_of(scores);

    std::size_t target_idx = candidates.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] == ex.target_token) target_idx = i;
    }
    loss += -std::log(std::max(p[target_idx], 1e-12));

    if (rigged) continue;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double delta = step * ((i == target_idx ? 1.0 : 0.0) - p[i]);
      auto& row = weights_[candidates[i]];
      for (const auto& w : words) row[w] += delta;
    }
  }
  ++steps_;
  return loss / static_cast<double>(batch.size());
}

ParamSnapshot MockMaskedLM::snapshot() const {
  nlohmann::json j;
  j["steps"] = steps_;
  j["weights"] = nlohmann::json::object();
  for (const auto& [cand, row] : weights_) {
    nlohmann::json jr = nlohmann::json::object();
    for (const auto& [word, w] : row) jr[word] = w;
    j["weights"][cand] = std::move(jr);
  }
  return j.dump();
}

void MockMaskedLM::restore(const ParamSnapshot& snapshot) {
  auto j = nlohmann::json::parse(snapshot);
  steps_ = j.at("steps").get<int>();
  weights_.clear();
  for (const auto& [cand, row] : j.at("weights").items()) {
    for (const auto& [word, w] : row.items()) {
      weights_[cand][word] = w.get<double>();
    }
  }
}

MockClassifier::MockClassifier(MockClassifierConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  weights_.resize(static_cast<std::size_t>(config_.num_labels));
  for (const auto& [label, row] : config_.prior) {
    if (label >= 0 && label < config_.num_labels) {
      weights_[static_cast<std::size_t>(label)] = row;
    }
  }
}

std::vector<double> MockClassifier::predict_proba(const std::string& text) {
  const auto word_set = distinct_words(text);
  std::vector<double> scores(weights_.size(), 0.0);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (const auto& w : word_set) {
      auto it = weights_[l].find(w);
      if (it != weights_[l].end()) scores[l] += it->second;
    }
  }
  return softmax_of(scores);
}

double MockClassifier::train_step(const std::vector<ClassifierExample>& batch,
                                  double learning_rate) {
  if (batch.empty()) throw Error("empty training batch");
  const double step = config_.base_step * (learning_rate / config_.reference_lr);
  const bool rigged = config_.underfit_seeds.count(seed_) != 0;

  double loss = 0;
  for (const auto& ex : batch) {
    if (ex.target.size() != weights_.size()) {
      throw Error("target distribution size mismatch");
    }
    const auto p = predict_proba(ex.text);
    for (std::size_t l = 0; l < p.size(); ++l) {
      loss += -ex.target[l] * std::log(std::max(p[l], 1e-12));
    }
    if (rigged) continue;
    const auto word_set = distinct_words(ex.text);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double delta = step * (ex.target[l] - p[l]);
      for (const auto& w : word_set) weights_[l][w] += delta;
    }
  }
  ++steps_;
  return loss / static_cast<double>(batch.size());
}

ParamSnapshot MockClassifier::snapshot() const {
  nlohmann::json j;
  j["steps"] = steps_;
  j["num_labels"] = config_.num_labels;
  j["weights"] = nlohmann::json::array();
  for (const auto& row : weights_) {
    nlohmann::json jr = nlohmann::json::object();
    for (const auto& [word, w] : row) jr[word] = w;
    j["weights"].push_back(std::move(jr));
  }
  return j.dump();
}

void MockClassifier::restore(const ParamSnapshot& snapshot) {
  auto j = nlohmann::json::parse(snapshot);
  steps_ = j.at("steps").get<int>();
  if (j.at("num_labels").get<int>() != config_.num_labels) {
    throw Error("snapshot label count does not match this classifier");
  }
  weights_.assign(static_cast<std::size_t>(config_.num_labels), {});
  std::size_t l = 0;
  for (const auto& row : j.at("weights")) {
    for (const auto& [word, w] : row.items()) weights_[l][word] = w.get<double>();
    ++l;
  }
}

MockGenerative::MockGenerative(MockGenerativeConfig config) : config_(std::move(config)) {
  sorted_ = config_.token_weights;
  std::sort(sorted_.begin(), sorted_.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, w] : sorted_) {
    (void)tok;
    if (w < 0) throw Error("negative token weight in generative mock");
    total_weight_ += w;
  }
}

std::vector<std::string> MockGenerative::sample_continuation(const std::string& prompt,
                                                             double top_p,
                                                             int max_new_tokens,
                                                             std::uint64_t seed) {
  if (top_p <= 0.0 || top_p > 1.0) throw Error("top_p must be in (0, 1]");
  if (max_new_tokens < 1) throw Error("max_new_tokens must be >= 1");

  auto scripted = config_.scripted.find(prompt);
  if (scripted != config_.scripted.end()) {
    auto seq = scripted->second;
    if (seq.size() > static_cast<std::size_t>(max_new_tokens)) {
      seq.resize(static_cast<std::size_t>(max_new_tokens));
    }
    return seq;
  }
  if (sorted_.empty() || total_weight_ <= 0) throw Error("generative mock has no tokens");

  // Nucleus: the smallest weight-descending prefix with cumulative
  // probability >= top_p.
  std::size_t nucleus_size = 0;
  double nucleus_weight = 0;
  for (const auto& [tok, w] : sorted_) {
    (void)tok;
    nucleus_weight += w;
    ++nucleus_size;
    if (nucleus_weight / total_weight_ >= top_p) break;
  }

  Rng rng(mix_seed(seed, fnv1a64(prompt)));
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(max_new_tokens));
  for (int i = 0; i < max_new_tokens; ++i) {
    double r = rng.next_double() * nucleus_weight;
    std::size_t pick = nucleus_size - 1;
    double acc = 0;
    for (std::size_t k = 0; k < nucleus_size; ++k) {
      acc += sorted_[k].second;
      if (r < acc) {
        pick = k;
        break;
      }
    }
    out.push_back(sorted_[pick].first);
  }
  return out;
}

std::unique_ptr<MaskedLMBackend> MockMaskedLMFactory::create(std::uint64_t seed) const {
  ++created_;
  return std::make_unique<MockMaskedLM>(config_, seed);
}

std::unique_ptr<ClassifierBackend> MockClassifierFactory::create(std::uint64_t seed) const {
  ++created_;
  return std::make_unique<MockClassifier>(config_, seed);
}

namespace {

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open backend config: " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

KeywordTable keyword_table_from_json(const nlohmann::json& j) {
  KeywordTable table;
  for (const auto& [cand, row] : j.items()) {
    for (const auto& [word, w] : row.items()) table[cand][word] = w.get<double>();
  }
  return table;
}

}  // namespace

MockLMConfig mock_lm_config_from_json_file(const std::filesystem::path& path) {
  const auto j = load_json_file(path);
  MockLMConfig config;
  if (j.contains("vocab")) {
    config.vocab = TokenInventory(j.at("vocab").get<std::vector<std::string>>(),
                                  {"[MASK]", "[PAD]", "[UNK]"});
  } else {
    config.vocab = default_mock_vocab();
  }
  if (j.contains("prior")) config.prior = keyword_table_from_json(j.at("prior"));
  config.base_step = j.value("base_step", config.base_step);
  if (j.contains("underfit_seeds")) {
    for (const auto& s : j.at("underfit_seeds")) {
      config.underfit_seeds.insert(s.get<std::uint64_t>());
    }
  }
  return config;
}

MockClassifierConfig mock_classifier_config_from_json_file(const std::filesystem::path& path,
                                                           int num_labels) {
  const auto j = load_json_file(path);
  MockClassifierConfig config;
  config.num_labels = num_labels;
  if (j.contains("prior")) {
    for (const auto& [label, row] : j.at("prior").items()) {
      auto& dest = config.prior[std::stoi(label)];
      for (const auto& [word, w] : row.items()) dest[word] = w.get<double>();
    }
  }
  config.base_step = j.value("base_step", config.base_step);
  return config;
}

MockGenerativeConfig mock_generative_config_from_json_file(const std::filesystem::path& path) {
  const auto j = load_json_file(path);
  MockGenerativeConfig config;
  for (const auto& [tok, w] : j.at("token_weights").items()) {
    config.token_weights.emplace_back(tok, w.get<double>());
  }
  if (j.contains("scripted")) {
    for (const auto& [prompt, seq] : j.at("scripted").items()) {
      config.scripted[prompt] = seq.get<std::vector<std::string>>();
    }
  }
  return config;
}

}  // namespace pet
