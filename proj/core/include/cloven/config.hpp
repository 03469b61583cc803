#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cloven/data.hpp"
#include "cloven/losses.hpp"
#include "cloven/model.hpp"
#include "cloven/train.hpp"

namespace cloven {

// Full experiment document: model + loss + train settings plus the dataset
// source and optional corruption. Parsed from JSON with exhaustive
// validation; unknown keys are rejected.
struct ExperimentConfig {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  std::optional<std::filesystem::path> dataset_manifest;
  std::optional<SynthConfig> synth;
  std::optional<CorruptionSpec> corruption;
  std::filesystem::path output_dir;

  MultiViewDataset load_data() const;
};

struct ConfigResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // every problem found, not just the first
  bool ok() const { return errors.empty(); }
};

ConfigResult parse_experiment_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir);
ConfigResult load_experiment_config(const std::filesystem::path& file);

// Serialized back out with defaults resolved (written next to run artifacts).
std::string experiment_config_to_json(const ExperimentConfig& cfg);

}  // namespace cloven
