#include "cloven/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace cloven {

namespace {

using nlohmann::json;

struct Parser {
  std::vector<std::string> errors;

  void error(const std::string& where, const std::string& what) {
    errors.push_back(where + ": " + what);
  }

  void check_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) {
        error(where, "unknown key '" + it.key() + "'");
      }
    }
  }

  template <typename T>
  void read(const json& j, const std::string& where, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      error(where, std::string("bad value for '") + key + "': " + e.what());
    }
  }

  void parse_model(const json& j, ModelConfig& cfg) {
    check_keys(j, "model",
               {"views", "encoder_widths", "common_dim", "fusion",
                "fusion_layers", "dropout", "clusters", "projection_widths",
                "clustering_hidden_width", "swap_scale_widths",
                "mapping_activation"});
    read(j, "model", "views", cfg.views);
    read(j, "model", "encoder_widths", cfg.encoder_widths);
    read(j, "model", "common_dim", cfg.common_dim);
    if (j.contains("fusion")) {
      const std::string kind = j.at("fusion").get<std::string>();
      if (kind == "vanilla") {
        cfg.fusion_kind = FusionKind::kVanilla;
      } else if (kind == "residual") {
        cfg.fusion_kind = FusionKind::kResidual;
      } else {
        error("model", "fusion must be 'vanilla' or 'residual', got '" + kind +
                           "'");
      }
    }
    read(j, "model", "fusion_layers", cfg.fusion_layers);
    read(j, "model", "dropout", cfg.dropout_p);
    read(j, "model", "clusters", cfg.clusters);
    read(j, "model", "projection_widths", cfg.projection_widths);
    read(j, "model", "clustering_hidden_width", cfg.clustering_hidden_width);
    read(j, "model", "swap_scale_widths", cfg.swap_scale_widths);
    read(j, "model", "mapping_activation", cfg.mapping_activation);
  }

  void parse_loss(const json& j, LossConfig& cfg) {
    check_keys(j, "loss",
               {"tau", "sigma", "sigma_relative", "entropy_mode", "icl", "ccl",
                "ddc", "asymmetric"});
    read(j, "loss", "tau", cfg.tau);
    read(j, "loss", "sigma", cfg.sigma);
    read(j, "loss", "sigma_relative", cfg.sigma_relative);
    if (j.contains("entropy_mode")) {
      const std::string mode = j.at("entropy_mode").get<std::string>();
      if (mode == "per_sample") {
        cfg.entropy_mode = EntropyMode::kPerSample;
      } else if (mode == "marginal") {
        cfg.entropy_mode = EntropyMode::kMarginal;
      } else {
        error("loss", "entropy_mode must be 'per_sample' or 'marginal'");
      }
    }
    read(j, "loss", "icl", cfg.use_icl);
    read(j, "loss", "ccl", cfg.use_ccl);
    read(j, "loss", "ddc", cfg.use_ddc);
    read(j, "loss", "asymmetric", cfg.asymmetric);
  }

  void parse_train(const json& j, TrainConfig& cfg) {
    check_keys(j, "train",
               {"lr", "beta1", "beta2", "adam_eps", "epochs", "batch_size",
                "seeds", "base_seed", "seed_count", "deterministic",
                "checkpoint_every"});
    read(j, "train", "lr", cfg.lr);
    read(j, "train", "beta1", cfg.beta1);
    read(j, "train", "beta2", cfg.beta2);
    read(j, "train", "adam_eps", cfg.adam_eps);
    read(j, "train", "epochs", cfg.epochs);
    read(j, "train", "batch_size", cfg.batch_size);
    read(j, "train", "seeds", cfg.seeds);
    read(j, "train", "base_seed", cfg.base_seed);
    if (j.contains("seed_count")) {
      std::size_t count = 10;
      read(j, "train", "seed_count", count);
      if (count < 1) {
        error("train", "seed_count must be >= 1");
      } else if (cfg.seeds.empty()) {
        for (std::uint64_t s = 0; s < count; ++s) {
          cfg.seeds.push_back(cfg.base_seed + s);
        }
      }
    }
    read(j, "train", "deterministic", cfg.deterministic);
    read(j, "train", "checkpoint_every", cfg.checkpoint_every);
  }

  void parse_synth(const json& j, SynthConfig& cfg) {
    check_keys(j, "dataset.synth",
               {"clusters", "samples", "views", "dims", "noise", "scale",
                "seed"});
    read(j, "dataset.synth", "clusters", cfg.clusters);
    read(j, "dataset.synth", "samples", cfg.samples);
    read(j, "dataset.synth", "views", cfg.views);
    read(j, "dataset.synth", "dims", cfg.dims);
    read(j, "dataset.synth", "noise", cfg.noise);
    read(j, "dataset.synth", "scale", cfg.scale);
    read(j, "dataset.synth", "seed", cfg.seed);
  }

  void parse_corruption(const json& j, CorruptionSpec& cfg) {
    check_keys(j, "corruption", {"scenario", "missing_rate", "fill", "seed"});
    if (j.contains("scenario")) {
      const std::string s = j.at("scenario").get<std::string>();
      if (s == "TCTI") {
        cfg.scenario = Scenario::kTCTI;
      } else if (s == "TITI") {
        cfg.scenario = Scenario::kTITI;
      } else {
        error("corruption", "scenario must be 'TCTI' or 'TITI'");
      }
    }
    read(j, "corruption", "missing_rate", cfg.missing_rate);
    if (j.contains("fill")) {
      const std::string f = j.at("fill").get<std::string>();
      if (f == "zero") {
        cfg.fill = FillPolicy::kZero;
      } else if (f == "gaussian_noise") {
        cfg.fill = FillPolicy::kGaussianNoise;
      } else {
        error("corruption", "fill must be 'zero' or 'gaussian_noise'");
      }
    }
    read(j, "corruption", "seed", cfg.seed);
  }
};

}  // namespace

MultiViewDataset ExperimentConfig::load_data() const {
  if (dataset_manifest) return load_dataset(*dataset_manifest);
  if (synth) return synth_gaussian_multiview(*synth);
  detail::fail_contract("experiment config: no dataset source given");
}

ConfigResult parse_experiment_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir) {
  ConfigResult result;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    result.errors.push_back(std::string("config parse error: ") + e.what());
    return result;
  }

  Parser p;
  ExperimentConfig cfg;
  p.check_keys(j, "config",
               {"model", "loss", "train", "dataset", "corruption",
                "output_dir"});
  if (j.contains("model")) p.parse_model(j.at("model"), cfg.model);
  if (j.contains("loss")) p.parse_loss(j.at("loss"), cfg.loss);
  if (j.contains("train")) p.parse_train(j.at("train"), cfg.train);
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    p.check_keys(d, "dataset", {"manifest", "synth"});
    if (d.contains("manifest") && d.contains("synth")) {
      p.error("dataset", "give either 'manifest' or 'synth', not both");
    }
    if (d.contains("manifest")) {
      std::filesystem::path m = d.at("manifest").get<std::string>();
      cfg.dataset_manifest = m.is_absolute() ? m : base_dir / m;
    }
    if (d.contains("synth")) {
      SynthConfig s;
      p.parse_synth(d.at("synth"), s);
      cfg.synth = s;
    }
  }
  if (j.contains("corruption")) {
    CorruptionSpec c;
    p.parse_corruption(j.at("corruption"), c);
    cfg.corruption = c;
  }
  if (j.contains("output_dir")) {
    std::filesystem::path o = j.at("output_dir").get<std::string>();
    cfg.output_dir = o.is_absolute() ? o : base_dir / o;
  }

  if (!cfg.dataset_manifest && !cfg.synth) {
    p.error("dataset", "a 'manifest' or 'synth' source is required");
  }

  // Structural validation, reported in the same error list.
  if (p.errors.empty()) {
    try {
      cfg.model.validate();
      cfg.loss.validate();
      cfg.train.validate();
      if (cfg.corruption &&
          (cfg.corruption->missing_rate < 0.0 ||
           cfg.corruption->missing_rate >= 1.0)) {
        p.error("corruption", "missing_rate must lie in [0, 1)");
      }
    } catch (const std::invalid_argument& e) {
      p.error("config", e.what());
    }
  }

  result.errors = std::move(p.errors);
  if (result.errors.empty()) result.config = std::move(cfg);
  return result;
}

ConfigResult load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    ConfigResult r;
    r.errors.push_back("cannot open config file " + file.string());
    return r;
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_config(text, file.parent_path());
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["model"] = json::parse(model_config_to_json(cfg.model));
  j["loss"] = {{"tau", cfg.loss.tau},
               {"sigma", cfg.loss.sigma},
               {"sigma_relative", cfg.loss.sigma_relative},
               {"entropy_mode", cfg.loss.entropy_mode == EntropyMode::kPerSample
                                    ? "per_sample"
                                    : "marginal"},
               {"icl", cfg.loss.use_icl},
               {"ccl", cfg.loss.use_ccl},
               {"ddc", cfg.loss.use_ddc},
               {"asymmetric", cfg.loss.asymmetric}};
  j["train"] = {{"lr", cfg.train.lr},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"seeds", cfg.train.seed_list()},
                {"deterministic", cfg.train.deterministic},
                {"checkpoint_every", cfg.train.checkpoint_every}};
  if (cfg.dataset_manifest) {
    j["dataset"]["manifest"] = cfg.dataset_manifest->string();
  }
  if (cfg.synth) {
    const SynthConfig& s = *cfg.synth;
    j["dataset"]["synth"] = {{"clusters", s.clusters}, {"samples", s.samples},
                             {"views", s.views},       {"dims", s.dims},
                             {"noise", s.noise},       {"scale", s.scale},
                             {"seed", s.seed}};
  }
  if (cfg.corruption) {
    j["corruption"] = {
        {"scenario",
         cfg.corruption->scenario == Scenario::kTCTI ? "TCTI" : "TITI"},
        {"missing_rate", cfg.corruption->missing_rate},
        {"fill",
         cfg.corruption->fill == FillPolicy::kZero ? "zero" : "gaussian_noise"},
        {"seed", cfg.corruption->seed}};
  }
  j["output_dir"] = cfg.output_dir.string();
  return j.dump(2);
}

}  // namespace cloven
