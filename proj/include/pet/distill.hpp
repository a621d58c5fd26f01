#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pet/backend.hpp"
#include "pet/data.hpp"
#include "pet/monitor.hpp"
#include "pet/pvp.hpp"
#include "pet/training.hpp"

namespace pet {

struct ModelWeight {
  std::string model_id;
  double weight = 0.0;
};

using EnsembleWeights = std::vector<ModelWeight>;

enum class WeightingScheme { Uniform, ZeroShotAccuracy };

std::string to_string(WeightingScheme scheme);

// Weight of each model = its zero-shot train-set accuracy; all-zero falls
// back to uniform.
EnsembleWeights compute_weights(const std::vector<PvpModel>& models,
                                WeightingScheme scheme = WeightingScheme::ZeroShotAccuracy);

struct SoftLabelStats {
  std::size_t scored = 0;
  std::size_t skipped = 0;
  std::vector<std::string> skipped_ids;
};

// Weighted arithmetic mean of the per-model label distributions, invariant
// under weight rescaling. Scoring failures skip the example and are
// recorded in stats. temperature sharpens (<1) or flattens (>1) the mixed
// target; 1 leaves it untouched.
std::vector<SoftLabeledExample> soft_label(const std::vector<PvpModel>& models,
                                           const EnsembleWeights& weights,
                                           const Dataset& unlabeled,
                                           SoftLabelStats* stats = nullptr,
                                           double temperature = 1.0);

// Final-classifier step budget: 2,000 once the unlabeled pool exceeds
// 4,000 examples, 1,000 otherwise.
int choose_final_steps(std::size_t unlabeled_size);

// Exactly `steps` optimizer steps of cross-entropy against the soft
// targets, cycling batches as in finetune_pvp. Monitoring wraps this at the
// pipeline level.
void train_final_classifier(ClassifierBackend& classifier,
                            const std::vector<SoftLabeledExample>& soft_set,
                            const TrainConfig& config, int steps);

std::vector<int> classifier_predictions(ClassifierBackend& classifier, const Dataset& data);

struct PipelineConfig {
  TrainConfig train;
  WeightingScheme weighting = WeightingScheme::ZeroShotAccuracy;
  double temperature = 1.0;
  std::optional<int> final_steps;  // default chosen from the unlabeled pool size
  MonitorPolicy model_monitor;                      // per-PVP models
  MonitorPolicy final_monitor{3, 2, 0.95};          // final classifiers may double twice
  bool transductive = false;  // unlabeled pool doubles as the test set

  std::string config_hash() const;
};

struct ModelReport {
  std::string model_id;
  std::string pvp_id;
  std::uint64_t base_seed = 0;
  double pre_accuracy = 0.0;
  double post_accuracy = 0.0;
  bool healthy = false;
  int steps_used = 0;
  std::vector<MonitorVerdict> verdicts;
};

struct EnsembleReport {
  std::vector<ModelReport> models;
  EnsembleWeights weights;
};

struct DistillReport {
  std::size_t soft_labeled = 0;
  std::size_t skipped = 0;
  int final_steps = 0;
  bool final_healthy = false;
  std::vector<MonitorVerdict> final_verdicts;
};

struct PetRunReport {
  std::string task;
  std::string config_hash;
  bool transductive = false;
  EnsembleReport ensemble;
  DistillReport distill;
};

nlohmann::json to_json(const MonitorVerdict& v);
nlohmann::json to_json(const ModelReport& r);
nlohmann::json to_json(const EnsembleReport& r);
nlohmann::json to_json(const DistillReport& r);
nlohmann::json to_json(const PetRunReport& r);

struct TrainedEnsemble {
  std::vector<PvpModel> models;
  EnsembleWeights weights;
  EnsembleReport report;
};

// Trains models_per_pvp models per PVP with monitoring; model seeds are
// derived from (config seed, generation, pvp_id, model index). Aborts if
// every model of some PVP stays unhealthy after escalation.
TrainedEnsemble train_pvp_ensemble(const TaskPack& pack, const Dataset& train,
                                   const Dataset& unlabeled, const MaskedLMFactory& factory,
                                   const PipelineConfig& config, int generation = 0);

struct DistillPhaseResult {
  std::unique_ptr<ClassifierBackend> classifier;
  std::vector<SoftLabeledExample> soft_set;
  DistillReport report;
};

// Soft-labels the unlabeled pool with the ensemble and trains the final
// classifier under monitoring.
DistillPhaseResult run_distill_phase(const TrainedEnsemble& ensemble, const Dataset& unlabeled,
                                     const ClassifierFactory& classifier_factory,
                                     const PipelineConfig& config);

struct PetResult {
  std::vector<PvpModel> models;
  EnsembleWeights weights;
  std::vector<SoftLabeledExample> soft_set;
  std::unique_ptr<ClassifierBackend> classifier;
  PetRunReport report;
};

// The full PET run: per-PVP finetuning (monitored), ensemble weighting,
// soft-labeling of the unlabeled pool, final-classifier distillation.
// When run_dir is given, the ledger, report, soft labels and parameter
// snapshots are persisted there.
PetResult pet_pipeline(const TaskPack& pack, const Dataset& train, const Dataset& unlabeled,
                       const MaskedLMFactory& mlm_factory,
                       const ClassifierFactory& classifier_factory,
                       const PipelineConfig& config,
                       const std::optional<std::filesystem::path>& run_dir = std::nullopt);

// Shared persistence used by the PET and iPET runners.
void write_run_artifacts(const std::filesystem::path& run_dir, const PetRunReport& report,
                         const std::vector<PvpModel>& models,
                         const std::vector<SoftLabeledExample>& soft_set,
                         const ClassifierBackend& classifier, int final_steps);

}  // namespace pet
