#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pet/vocab.hpp"

namespace pet {

struct MaskedLmExample {
  std::string cloze;
  std::string target_token;
};

struct ClassifierExample {
  std::string text;
  std::vector<double> target;  // distribution over labels
};

// Opaque serialized parameter state.
using ParamSnapshot = std::string;

// Finetunable masked-LM scorer. Raw (pre-normalization) scores are the
// contract's currency; normalization over the label set happens exactly
// once, in the training module.
class MaskedLMBackend {
 public:
  virtual ~MaskedLMBackend() = default;

  // One finite raw score per candidate, order-aligned with candidates.
  // The cloze must contain exactly one mask token and every candidate must
  // be a single vocabulary token.
  virtual std::vector<double> score_mask(const std::string& cloze,
                                         const std::vector<std::string>& candidates) = 0;

  // One optimizer step on the batch; returns the loss value.
  virtual double train_step(const std::vector<MaskedLmExample>& batch,
                            double learning_rate) = 0;

  virtual ParamSnapshot snapshot() const = 0;
  virtual void restore(const ParamSnapshot& snapshot) = 0;

  virtual const TokenInventory& vocab() const = 0;
  virtual std::string name() const = 0;
};

// Regular sequence-classification head over raw text.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;

  virtual std::vector<double> predict_proba(const std::string& text) = 0;
  virtual double train_step(const std::vector<ClassifierExample>& batch,
                            double learning_rate) = 0;

  virtual ParamSnapshot snapshot() const = 0;
  virtual void restore(const ParamSnapshot& snapshot) = 0;

  virtual int num_labels() const = 0;
  virtual std::string name() const = 0;
};

// Generative LM used for synthetic unlabeled data.
class GenerativeBackend {
 public:
  virtual ~GenerativeBackend() = default;

  // At most max_new_tokens tokens; identical (prompt, seed) pairs give
  // identical sequences.
  virtual std::vector<std::string> sample_continuation(const std::string& prompt,
                                                       double top_p, int max_new_tokens,
                                                       std::uint64_t seed) = 0;
  virtual std::string name() const = 0;
};

// Ensemble members each own an independent backend instance created from a
// per-model seed.
class MaskedLMFactory {
 public:
  virtual ~MaskedLMFactory() = default;
  virtual std::unique_ptr<MaskedLMBackend> create(std::uint64_t seed) const = 0;
};

class ClassifierFactory {
 public:
  virtual ~ClassifierFactory() = default;
  virtual std::unique_ptr<ClassifierBackend> create(std::uint64_t seed) const = 0;
};

// Persists a parameter snapshot to <dir>/<stem>.snapshot.json together with
// its manifest (backend name, seed, step count).
void write_snapshot_file(const std::filesystem::path& dir, const std::string& stem,
                         const std::string& backend_name, std::uint64_t seed,
                         int step_count, const ParamSnapshot& params);

struct SnapshotFile {
  std::string backend_name;
  std::uint64_t seed = 0;
  int step_count = 0;
  ParamSnapshot params;
};

SnapshotFile read_snapshot_file(const std::filesystem::path& file);

}  // namespace pet
