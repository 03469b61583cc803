#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cloven/data.hpp"
#include "cloven/losses.hpp"
#include "cloven/model.hpp"

namespace cloven {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::vector<std::uint64_t> seeds;  // empty: 10 consecutive from base_seed
  std::uint64_t base_seed = 0;
  bool deterministic = true;
  std::filesystem::path output_dir;  // empty: keep everything in memory
  std::size_t checkpoint_every = 0;  // 0: final epoch only

  void validate() const;
  std::vector<std::uint64_t> seed_list() const;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update; gradients are read from the params' grad
// buffers and left untouched.
void adam_step(std::vector<Tensor>& params, AdamState& state,
               const TrainConfig& cfg);

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBreakdown loss;
};

struct RunRecord {
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  std::vector<LossBreakdown> epoch_means;  // one entry per epoch
  std::filesystem::path checkpoint;        // empty when output_dir unset
  std::filesystem::path log;
};

// Raised when a step produces a non-finite loss; carries the offending batch.
struct TrainingAborted : std::runtime_error {
  TrainingAborted(std::string msg, std::size_t epoch, std::size_t step)
      : std::runtime_error(std::move(msg)), epoch(epoch), step(step) {}
  std::size_t epoch;
  std::size_t step;
};

// Full single-seed optimization: seeded init, shuffled minibatches, forward,
// backward, Adam; per-step breakdown appended to the JSONL log; checkpoint
// written at the end (and optionally every checkpoint_every epochs together
// with a resume file).
RunRecord train_one(CloVenModel& model, const MultiViewDataset& data,
                    const TrainConfig& train_cfg, const LossConfig& loss_cfg,
                    std::uint64_t seed,
                    SimilarityAudit* audit = nullptr,
                    const std::optional<std::filesystem::path>& resume_from =
                        std::nullopt);

// Deep copy: fresh parameter and state buffers with identical values.
CloVenModel clone_model(const CloVenModel& model);

struct MultiSeedResult {
  std::vector<RunRecord> records;
  std::size_t best_index = 0;
  std::optional<CloVenModel> best_model;
  const RunRecord& best() const { return records[best_index]; }
};

// Trains one freshly initialized model per seed and keeps the record (and
// trained model) with the lowest final loss; ties break toward the lowest
// seed value.
MultiSeedResult multi_seed(const MultiViewDataset& data,
                           const ModelConfig& model_cfg,
                           const TrainConfig& train_cfg,
                           const LossConfig& loss_cfg);

// Picks the argmin of final losses with the documented tie-break.
std::size_t select_best_run(const std::vector<RunRecord>& records);

}  // namespace cloven
