#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "pet/distill.hpp"
#include "pet/ipet.hpp"

namespace pet {

// One row of the binary reformulation: (x, y, polarity).
struct BinaryExample {
  InputExample example;
  int intent = 0;
  bool polarity = false;
};

using BinaryDataset = std::vector<BinaryExample>;

// Bookkeeping row mirroring the expansion invariants.
struct BinaryExpansion {
  std::string source_example_id;
  int intent = 0;
  bool polarity = false;
};

// Per source example: one (x, y, True) row followed by `negatives`
// (x, y', False) rows with pairwise-distinct wrong intents. Output size is
// |train| * (1 + negatives); deterministic in the seed.
BinaryDataset expand_binary(const Dataset& train, std::size_t num_labels, int negatives,
                            std::uint64_t seed, std::vector<BinaryExpansion>* rows = nullptr);

// Substitutes the label's name into a binary-scheme base PVP's {label} slot.
PatternVerbalizerPair binary_pvp_for(const TaskPack& pack,
                                     const PatternVerbalizerPair& base_pvp, int label);

// All base PVPs of the pack instantiated for one label (the four per-task
// PVPs: with/without the task description, yes/no and true/false
// verbalizers).
std::vector<PatternVerbalizerPair> binary_pvps_for(const TaskPack& pack, int label);

// A finetuned binary model; scoring instantiates the base pattern per
// intent.
struct BinaryPvpModel {
  std::string pvp_id;
  std::string model_id;
  std::uint64_t seed = 0;
  PatternVerbalizerPair base;  // carries the {label} slot
  std::shared_ptr<MaskedLMBackend> backend;
  double pre_train_accuracy = 0.0;
  double post_train_accuracy = 0.0;
  int steps_used = 0;
};

// P(True | x, y) for one model.
double binary_true_probability(const BinaryPvpModel& model, const TaskPack& pack,
                               const InputExample& example, int intent);

BinaryPvpModel finetune_binary(std::unique_ptr<MaskedLMBackend> backend, const TaskPack& pack,
                               const PatternVerbalizerPair& base_pvp,
                               const BinaryDataset& train, const TrainConfig& config);

struct BinaryEnsemble {
  std::vector<BinaryPvpModel> models;
  EnsembleWeights weights;
  EnsembleReport report;
};

BinaryEnsemble train_binary_ensemble(const TaskPack& pack, const BinaryDataset& train,
                                     const MaskedLMFactory& factory,
                                     const PipelineConfig& config, int binary_steps,
                                     int generation = 0);

// The ensemble-weighted P(True | x, y) for every label y, normalized to
// sum 1 (uniform when the sum degenerates to zero). Costs exactly one
// score_mask call per label per model.
std::vector<double> score_all_intents(const BinaryEnsemble& ensemble, const TaskPack& pack,
                                      const InputExample& example);

// Trains the K-way head on score_all_intents targets.
struct KwayDistillResult {
  std::unique_ptr<ClassifierBackend> classifier;
  std::vector<SoftLabeledExample> soft_set;
  DistillReport report;
};

KwayDistillResult distill_kway(const ClassifierFactory& classifier_factory,
                               const BinaryEnsemble& ensemble, const TaskPack& pack,
                               const Dataset& unlabeled, const PipelineConfig& config,
                               int kway_steps);

struct MultilabelConfig {
  PipelineConfig base;
  int negatives = 4;
  int binary_steps = 500;  // individual binary models
  int kway_steps = 5000;   // K-way classification head
  int coverage_k = 2;
  int generations = 2;  // second generation trains on label-coverage data

  void validate(std::size_t num_labels) const;
};

struct MultilabelRunReport {
  std::string task;
  std::string config_hash;
  std::vector<EnsembleReport> generations;
  std::vector<std::size_t> train_sizes;  // binary rows per generation
  DistillReport distill;
};

nlohmann::json to_json(const MultilabelRunReport& r);

struct MultilabelResult {
  BinaryEnsemble ensemble;  // final generation
  std::unique_ptr<ClassifierBackend> classifier;
  std::vector<SoftLabeledExample> soft_set;
  MultilabelRunReport report;
};

// The many-label pipeline: binary expansion, binary PVP ensembles (two
// generations with a label-coverage bootstrap in between), K-way
// distillation over the unlabeled pool.
MultilabelResult multilabel_pipeline(const TaskPack& pack, const Dataset& train,
                                     const Dataset& unlabeled,
                                     const MaskedLMFactory& mlm_factory,
                                     const ClassifierFactory& classifier_factory,
                                     const MultilabelConfig& config,
                                     const std::optional<std::filesystem::path>& run_dir =
                                         std::nullopt);

}  // namespace pet
