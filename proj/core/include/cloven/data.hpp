#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cloven/rng.hpp"
#include "cloven/tensor.hpp"

namespace cloven {

// Aligned per-view feature matrices with optional ground-truth labels.
// Values are 32-bit floats on disk; in memory they are held as doubles that
// remain exactly float-representable, so save/load round trips are bit-exact.
struct MultiViewDataset {
  std::string name;
  std::vector<Tensor> views;  // each N x d_v
  std::vector<int> labels;    // empty when absent

  std::size_t samples() const { return views.empty() ? 0 : views[0].rows(); }
  std::size_t view_count() const { return views.size(); }
  bool has_labels() const { return !labels.empty(); }
  std::size_t class_count() const;
};

// Manifest JSON schema: {"name", "dtype": "f32", "views": [paths],
// "dims": [d_v...], "labels": path?}. View paths ending in .bin are binary
// (u32 rows, u32 cols header, then row-major little-endian f32); .csv files
// hold comma-separated rows. Label files are text, one integer per line.
MultiViewDataset load_dataset(const std::filesystem::path& manifest);
// Writes <name>.json plus per-view binaries and the label file into dir.
std::filesystem::path save_dataset(const MultiViewDataset& data,
                                   const std::filesystem::path& dir);

// Single matrices in the same binary format (f32 payload).
void save_matrix(const Tensor& m, const std::filesystem::path& path);
Tensor load_matrix(const std::filesystem::path& path);

struct SynthConfig {
  std::size_t clusters = 3;
  std::size_t samples = 600;
  std::size_t views = 2;
  std::vector<std::size_t> dims;  // per view; empty means 10 everywhere
  double noise = 0.1;             // per-view Gaussian noise
  double scale = 1.0;             // simplex corner scale
  std::uint64_t seed = 0;
};

// Balanced clusters on a scaled simplex, pushed through one fixed random
// linear map per view, plus per-view Gaussian noise.
MultiViewDataset synth_gaussian_multiview(const SynthConfig& cfg);

enum class Scenario { kTCTI, kTITI };
enum class FillPolicy { kZero, kGaussianNoise };

struct CorruptionSpec {
  Scenario scenario = Scenario::kTCTI;
  double missing_rate = 0.0;  // eta in [0, 1)
  FillPolicy fill = FillPolicy::kZero;
  std::uint64_t seed = 0;
};

struct CorruptionMask {
  // (sample, view) pairs that were overwritten.
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  bool empty() const { return entries.empty(); }
};

struct CorruptResult {
  MultiViewDataset data;
  CorruptionMask mask;
};

// Selects each sample independently with probability eta and overwrites one
// uniformly chosen view of it per the fill policy. A corrupted sample always
// keeps at least one intact view.
CorruptResult corrupt(const MultiViewDataset& data, const CorruptionSpec& spec);

struct MultiViewBatch {
  std::vector<Tensor> views;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
  std::size_t size() const { return indices.size(); }
};

// Seeded shuffled minibatch index plan; epochs are independently addressable
// so interrupted runs can resume mid-schedule.
class BatchIterator {
 public:
  BatchIterator(std::size_t samples, std::size_t batch_size,
                std::uint64_t seed, bool drop_last = true);

  std::vector<std::vector<std::size_t>> epoch(std::uint64_t epoch_index) const;
  std::size_t batches_per_epoch() const;

 private:
  std::size_t samples_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  bool drop_last_;
};

MultiViewBatch gather_batch(const MultiViewDataset& data,
                            const std::vector<std::size_t>& indices);

}  // namespace cloven
