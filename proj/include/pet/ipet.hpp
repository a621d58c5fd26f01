#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "pet/distill.hpp"

namespace pet {

// Self-training schedule: generation g trains on the original labeled set
// plus self-labeled examples up to a total of n * growth_factor^g examples,
// capped at the unlabeled pool size.
struct IpetSchedule {
  int generations = 3;
  double growth_factor = 5.0;

  enum class Proportionality { Balanced, PriorProportional };
  Proportionality proportionality = Proportionality::Balanced;

  void validate() const;

  // Targets for generations 1..generations (generation 0 trains on the
  // originals alone).
  std::vector<std::size_t> size_targets(std::size_t n_train, std::size_t n_unlabeled) const;
};

// Per-label quotas summing to `additions`: balanced (equal per label,
// remainder to the lowest label indices) or proportional to the argmax
// prior of the predictions.
std::vector<std::size_t> self_label_quotas(const std::vector<SoftLabeledExample>& predictions,
                                           std::size_t additions, std::size_t num_labels,
                                           IpetSchedule::Proportionality proportionality);

// Most-confident-first claim assignment: each label takes its quota of
// unassigned examples, highest probability first, ties broken by
// example_id. With strict=true, unfilled quotas are an error.
Dataset claim_by_confidence(const std::vector<SoftLabeledExample>& predictions,
                            const std::vector<std::size_t>& quotas, bool strict);

// For each label, the k unlabeled examples with the highest ensemble
// probability, without replacement across labels; covers every label
// exactly k times.
Dataset label_coverage_bootstrap(const std::vector<PvpModel>& models,
                                 const EnsembleWeights& weights, const Dataset& unlabeled,
                                 std::size_t num_labels, std::size_t k = 2);

struct IpetRunReport {
  std::string task;
  std::string config_hash;
  bool transductive = false;
  std::vector<EnsembleReport> generations;
  std::vector<std::size_t> generation_sizes;  // training-set size per generation
  DistillReport distill;
};

nlohmann::json to_json(const IpetRunReport& r);

struct IpetResult {
  std::vector<PvpModel> models;  // final generation
  EnsembleWeights weights;
  std::vector<SoftLabeledExample> soft_set;
  std::unique_ptr<ClassifierBackend> classifier;
  IpetRunReport report;
};

// Generation 0 trains as in PET; each later generation trains on the
// original labeled set plus self-labeled data from the previous ensemble;
// the final generation distills as in PET. generations=1 is exactly the
// PET pipeline.
IpetResult ipet_run(const TaskPack& pack, const Dataset& train, const Dataset& unlabeled,
                    const MaskedLMFactory& mlm_factory,
                    const ClassifierFactory& classifier_factory, const IpetSchedule& schedule,
                    const PipelineConfig& config,
                    const std::optional<std::filesystem::path>& run_dir = std::nullopt);

}  // namespace pet
