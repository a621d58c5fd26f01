#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pet/backend.hpp"
#include "pet/data.hpp"
#include "pet/pvp.hpp"

namespace pet {

struct TrainConfig {
  double learning_rate = 1e-5;
  int steps = 100;
  int batch_size = 4;
  std::uint64_t seed = 0;
  int models_per_pvp = 1;

  void validate() const;
};

// One finetuned PVP model together with its train-set accuracy before
// (zero-shot, the distillation weighting signal) and after finetuning.
struct PvpModel {
  std::string pvp_id;
  std::string model_id;
  std::uint64_t seed = 0;
  PatternVerbalizerPair pvp;
  std::shared_ptr<MaskedLMBackend> backend;
  double pre_train_accuracy = 0.0;
  double post_train_accuracy = 0.0;
  int steps_used = 0;
};

// Numerically stable normalized exponential; shift-invariant by
// construction.
std::vector<double> softmax(const std::vector<double>& scores);

// p(y|x): the mask scores of each label's verbalization, normalized over
// all labels.
std::vector<double> label_distribution(MaskedLMBackend& backend,
                                       const PatternVerbalizerPair& pvp,
                                       const InputExample& example);

int predict_label(MaskedLMBackend& backend, const PatternVerbalizerPair& pvp,
                  const InputExample& example);

std::vector<int> predict_labels(MaskedLMBackend& backend, const PatternVerbalizerPair& pvp,
                                const Dataset& data);

double train_accuracy(MaskedLMBackend& backend, const PatternVerbalizerPair& pvp,
                      const Dataset& labeled);

// Runs exactly config.steps optimizer steps over batches of
// config.batch_size, cycling through the train set with a seed-controlled
// reshuffle per pass. Records pre- and post-training train accuracy.
PvpModel finetune_pvp(std::unique_ptr<MaskedLMBackend> backend,
                      const PatternVerbalizerPair& pvp, const Dataset& train,
                      const TrainConfig& config);

double evaluate_accuracy(const std::vector<int>& predictions, const std::vector<int>& gold);

// Unweighted mean of per-class F1; a class with no gold and no predicted
// instances contributes 0.
double macro_f1(const std::vector<int>& predictions, const std::vector<int>& gold,
                int num_labels);

double evaluate(const std::vector<int>& predictions, const std::vector<int>& gold,
                Metric metric, int num_labels);

}  // namespace pet
