#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pet/distill.hpp"
#include "pet/ipet.hpp"
#include "pet/pvp.hpp"

namespace pet {

// One few-shot experiment split: a balanced labeled sample (per-class
// counts differ by at most one) and a disjoint unlabeled pool.
struct FewShotSplit {
  int n = 0;
  std::uint64_t seed = 0;
  Dataset train;
  Dataset unlabeled;
};

FewShotSplit sample_split(const Dataset& full, int n, std::uint64_t seed,
                          std::size_t num_labels, std::size_t unlabeled_count = 1000);

// Append-only results ledger keyed by (study, task, n, seed, cell,
// config-hash). Completed cells are skipped on reruns and their payloads
// reused, which makes every study restartable.
class ResultsLedger {
 public:
  explicit ResultsLedger(std::filesystem::path file);

  bool completed(const std::string& key) const { return rows_.count(key) != 0; }
  std::optional<nlohmann::json> lookup(const std::string& key) const;
  void record(const std::string& key, const nlohmann::json& meta,
              const nlohmann::json& payload);
  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
  std::map<std::string, nlohmann::json> rows_;
};

struct StudyIO {
  std::optional<std::filesystem::path> output_dir;
  ResultsLedger* ledger = nullptr;
};

// Paper-protocol grids for the one-factor-at-a-time sweep.
struct SweepGrids {
  std::vector<double> learning_rates = {1e-4, 5e-4, 1e-5, 5e-5, 1e-6};
  std::vector<int> steps = {10, 25, 50, 100, 250, 500, 1000};
  std::vector<int> batch_sizes = {1, 2, 4, 8, 16, 32};
};

struct PatternStudyResult {
  struct Row {
    std::string row_id;  // pvp_id, "PET" or "iPET"
    std::string category;
    std::vector<double> per_split;
    double mean = 0.0;
  };
  std::vector<Row> rows;
  std::map<std::string, double> category_means;  // NULL / PUNC / PROMPT / QA
};

PatternStudyResult run_pattern_study(const TaskPack& pack,
                                     const std::vector<FewShotSplit>& splits,
                                     const Dataset& test, const MaskedLMFactory& mlm_factory,
                                     const ClassifierFactory& classifier_factory,
                                     const PipelineConfig& config,
                                     const IpetSchedule& ipet_schedule,
                                     const StudyIO& io = {});

struct NoiseStudyResult {
  std::vector<double> accuracy_by_noise_count;  // 21 points, 0..20 noise PVPs
  double noise_only_pet = 0.0;                  // "NP+P"
  double noise_only_individual_mean = 0.0;      // "NP"
  std::vector<std::string> selected_pvp_ids;    // the 3 high-quality picks per split
};

NoiseStudyResult run_noise_study(const TaskPack& pack, const std::vector<FewShotSplit>& splits,
                                 const Dataset& test, const MaskedLMFactory& mlm_factory,
                                 const ClassifierFactory& classifier_factory,
                                 const PipelineConfig& config, int noise_pvp_count = 20,
                                 const StudyIO& io = {});

struct SubsetStudyResult {
  std::vector<double> relative_mean_by_prefix;  // i = 1..max_prefix
  int permutations = 0;
};

SubsetStudyResult run_subset_study(const TaskPack& pack,
                                   const std::vector<FewShotSplit>& splits, const Dataset& test,
                                   const MaskedLMFactory& mlm_factory,
                                   const ClassifierFactory& classifier_factory,
                                   const PipelineConfig& config, int permutations = 10,
                                   int max_prefix = 5, const StudyIO& io = {});

struct SweepStudyResult {
  struct Cell {
    std::string parameter;  // "learning_rate" | "steps" | "batch_size"
    double value = 0.0;
    double pet_mean = 0.0;
    double individual_mean = 0.0;
  };
  std::vector<Cell> cells;  // 5 + 7 + 6 = 18 per (task, n)
};

SweepStudyResult run_hparam_sweep(const TaskPack& pack,
                                  const std::vector<FewShotSplit>& splits, const Dataset& test,
                                  const MaskedLMFactory& mlm_factory,
                                  const ClassifierFactory& classifier_factory,
                                  const PipelineConfig& config,
                                  const SweepGrids& grids = {}, const StudyIO& io = {});

// Spearman rank correlation with average ranks for ties; the Q2 aggregate
// between per-pattern scores of two backends.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

double mean_of(const std::vector<double>& values);

// "ID,Label" CSV, labels rendered as the task pack's label strings.
void emit_raft_predictions(ClassifierBackend& classifier, const Dataset& test,
                           const std::vector<std::string>& labels,
                           const std::filesystem::path& path);

std::vector<std::pair<std::string, std::string>> read_predictions_csv(
    const std::filesystem::path& path);

}  // namespace pet
