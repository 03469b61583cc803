#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cloven/config.hpp"
#include "cloven/eval.hpp"
#include "cloven/train.hpp"

namespace cloven {

struct TrainOutcome {
  MultiSeedResult runs;
  MetricsReport metrics;  // evaluation of the best run
};

// The full training protocol: resolve the dataset, train every seed, pick
// the lowest-loss run, evaluate it, and (when output_dir is set) write the
// resolved config, run summary, and metrics files.
TrainOutcome run_training_experiment(const ExperimentConfig& cfg);

struct SweepPoint {
  double rate = 0.0;
  std::uint64_t seed = 0;
  ClusterMetrics metrics;
};

struct SweepResult {
  Scenario scenario = Scenario::kTCTI;
  std::vector<SweepPoint> points;  // one per (rate, seed)
  std::filesystem::path csv;

  double mean_acc(double rate) const;
};

// Incomplete-view robustness sweep. TCTI trains once per seed on clean data
// and evaluates at every missing rate; TITI retrains per (rate, seed) on the
// corrupted data and evaluates on the same corrupted copy.
SweepResult run_corruption_sweep(const ExperimentConfig& cfg,
                                 Scenario scenario,
                                 const std::vector<double>& rates);

enum class AblationAxis { kLossTerms, kFusionLayers };

struct AblationCell {
  std::string label;
  bool icl = true, ccl = true, ddc = true, asymmetric = true;
  std::size_t fusion_layers = 2;
  std::uint64_t seed = 0;
  ClusterMetrics clustering;
  ProbeMetrics classification;
};

struct AblationResult {
  std::vector<AblationCell> cells;  // one per (case, seed)
  std::filesystem::path csv;

  double mean_acc(const std::string& label) const;
};

// Loss-term grid (baseline plus toggled variants) or fusion-depth sweep
// (L in 1..4), retraining every cell.
AblationResult run_ablation(const ExperimentConfig& cfg, AblationAxis axis);

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool pass() const { return max_rel_err <= tolerance; }
};

// Finite-difference verification of every differentiable op and every loss
// term, on small random instances.
std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed);

// Writes Z, the per-view representations, and the soft assignments in the
// dataset binary format for external visualization.
void export_embeddings(CloVenModel& model, const MultiViewDataset& data,
                       const std::filesystem::path& out_dir);

}  // namespace cloven
