#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pet/backend.hpp"

namespace pet {

// Keyword-weight table: candidate token -> word -> weight. The score of a
// candidate is the sum of its weights over the distinct words present in
// the cloze string, which keeps every score recomputable by hand.
using KeywordTable = std::map<std::string, std::map<std::string, double>>;

struct MockLMConfig {
  TokenInventory vocab;
  KeywordTable prior;           // "pretrained" knowledge; drives zero-shot accuracy
  double base_step = 0.1;       // update scale at the default learning rate
  double reference_lr = 1e-5;   // config learning rate that maps to base_step
  std::set<std::uint64_t> underfit_seeds;  // rigged seeds: train_step is a no-op
};

TokenInventory default_mock_vocab();

class MockMaskedLM final : public MaskedLMBackend {
 public:
  MockMaskedLM(MockLMConfig config, std::uint64_t seed);

  std::vector<double> score_mask(const std::string& cloze,
                                 const std::vector<std::string>& candidates) override;
  double train_step(const std::vector<MaskedLmExample>& batch,
                    double learning_rate) override;
  ParamSnapshot snapshot() const override;
  void restore(const ParamSnapshot& snapshot) override;
  const TokenInventory& vocab() const override { return config_.vocab; }
  std::string name() const override { return "mock-mlm"; }

  const KeywordTable& table() const { return weights_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t score_mask_calls() const { return score_mask_calls_; }
  int steps_taken() const { return steps_; }

 private:
  double score_one(const std::vector<std::string>& words, const std::string& candidate) const;

  MockLMConfig config_;
  KeywordTable weights_;
  std::uint64_t seed_;
  std::uint64_t score_mask_calls_ = 0;
  int steps_ = 0;
};

struct MockClassifierConfig {
  int num_labels = 2;
  std::map<int, std::map<std::string, double>> prior;  // label -> word -> weight
  double base_step = 0.5;
  double reference_lr = 1e-5;
  std::set<std::uint64_t> underfit_seeds;
};

class MockClassifier final : public ClassifierBackend {
 public:
  MockClassifier(MockClassifierConfig config, std::uint64_t seed);

  std::vector<double> predict_proba(const std::string& text) override;
  double train_step(const std::vector<ClassifierExample>& batch,
                    double learning_rate) override;
  ParamSnapshot snapshot() const override;
  void restore(const ParamSnapshot& snapshot) override;
  int num_labels() const override { return config_.num_labels; }
  std::string name() const override { return "mock-classifier"; }

  int steps_taken() const { return steps_; }

 private:
  MockClassifierConfig config_;
  std::vector<std::map<std::string, double>> weights_;  // per label
  std::uint64_t seed_;
  int steps_ = 0;
};

// Word-level generative mock. Tokens are drawn by nucleus sampling from a
// fixed weighted vocabulary; exact prompts can be scripted for tests.
struct MockGenerativeConfig {
  std::vector<std::pair<std::string, double>> token_weights;
  std::map<std::string, std::vector<std::string>> scripted;  // prompt -> token sequence
};

class MockGenerative final : public GenerativeBackend {
 public:
  explicit MockGenerative(MockGenerativeConfig config);

  std::vector<std::string> sample_continuation(const std::string& prompt, double top_p,
                                               int max_new_tokens,
                                               std::uint64_t seed) override;
  std::string name() const override { return "mock-generative"; }

 private:
  MockGenerativeConfig config_;
  std::vector<std::pair<std::string, double>> sorted_;  // weight-descending
  double total_weight_ = 0;
};

class MockMaskedLMFactory final : public MaskedLMFactory {
 public:
  explicit MockMaskedLMFactory(MockLMConfig config) : config_(std::move(config)) {}
  std::unique_ptr<MaskedLMBackend> create(std::uint64_t seed) const override;
  std::uint64_t instances_created() const { return created_; }

 private:
  MockLMConfig config_;
  mutable std::uint64_t created_ = 0;
};

class MockClassifierFactory final : public ClassifierFactory {
 public:
  explicit MockClassifierFactory(MockClassifierConfig config) : config_(std::move(config)) {}
  std::unique_ptr<ClassifierBackend> create(std::uint64_t seed) const override;
  std::uint64_t instances_created() const { return created_; }

 private:
  MockClassifierConfig config_;
  mutable std::uint64_t created_ = 0;
};

MockLMConfig mock_lm_config_from_json_file(const std::filesystem::path& path);
MockClassifierConfig mock_classifier_config_from_json_file(const std::filesystem::path& path,
                                                           int num_labels);
MockGenerativeConfig mock_generative_config_from_json_file(const std::filesystem::path& path);

}  // namespace pet
