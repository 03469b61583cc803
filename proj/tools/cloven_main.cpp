// cloven: train and evaluate clustering-guided contrastive fusion models on
// multi-view data. Subcommands: synth, train, eval, corrupt-sweep, ablate,
// gradcheck, export-embeddings.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure,
// 3 verification failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cloven/checkpoint.hpp"
#include "cloven/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerification = 3;

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv("CLOVEN_OUT")) return env;
  return "cloven-out";
}

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  // Flag overrides; precedence is flags > config file > defaults.
  std::optional<std::string> fusion;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<bool> deterministic;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("-c,--config", flags.config_path,
                  "experiment config JSON file")
      ->required();
  cmd->add_option("-o,--out", flags.output_dir,
                  "output directory (default: config output_dir, else "
                  "$CLOVEN_OUT)");
  cmd->add_option("--fusion", flags.fusion, "override: vanilla | residual");
  cmd->add_option("--epochs", flags.epochs, "override: training epochs");
  cmd->add_option("--batch-size", flags.batch_size, "override: batch size");
  cmd->add_option("--lr", flags.lr, "override: learning rate");
  cmd->add_option("--seeds", flags.seeds, "override: list of training seeds");
  cmd->add_option("--deterministic", flags.deterministic,
                  "override: deterministic mode");
}

// Loads the config and applies flag overrides; prints every validation
// problem on failure.
std::optional<cloven::ExperimentConfig> resolve_config(
    const CommonFlags& flags) {
  cloven::ConfigResult parsed =
      cloven::load_experiment_config(flags.config_path);
  if (!parsed.ok()) {
    std::cerr << "config validation failed:\n";
    for (const std::string& e : parsed.errors) std::cerr << "  - " << e << "\n";
    return std::nullopt;
  }
  cloven::ExperimentConfig cfg = std::move(*parsed.config);
  if (flags.fusion) {
    if (*flags.fusion == "vanilla") {
      cfg.model.fusion_kind = cloven::FusionKind::kVanilla;
    } else if (*flags.fusion == "residual") {
      cfg.model.fusion_kind = cloven::FusionKind::kResidual;
    } else {
      std::cerr << "--fusion must be 'vanilla' or 'residual'\n";
      return std::nullopt;
    }
  }
  if (flags.epochs) cfg.train.epochs = *flags.epochs;
  if (flags.batch_size) cfg.train.batch_size = *flags.batch_size;
  if (flags.lr) cfg.train.lr = *flags.lr;
  if (flags.seeds) cfg.train.seeds = *flags.seeds;
  if (flags.deterministic) cfg.train.deterministic = *flags.deterministic;
  if (!flags.output_dir.empty()) cfg.output_dir = flags.output_dir;
  if (cfg.output_dir.empty()) cfg.output_dir = default_output_root();
  return cfg;
}

std::vector<double> parse_rates(const std::string& csv) {
  std::vector<double> rates;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string cell = csv.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!cell.empty()) rates.push_back(std::stod(cell));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return rates;
}

int cmd_synth(const cloven::SynthConfig& synth_cfg, const std::string& out) {
  const cloven::MultiViewDataset data = cloven::synth_gaussian_multiview(synth_cfg);
  const auto manifest = cloven::save_dataset(data, out);
  std::cout << "wrote " << manifest.string() << " (" << data.samples()
            << " samples, " << data.view_count() << " views)\n";
  return kExitOk;
}

int cmd_train(const cloven::ExperimentConfig& cfg) {
  const cloven::TrainOutcome outcome = cloven::run_training_experiment(cfg);
  std::cout << "best seed " << outcome.runs.best().seed << " final loss "
            << outcome.runs.best().final_loss << "\n"
            << cloven::metrics_to_table(outcome.metrics)
            << "artifacts in " << cfg.output_dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest,
             std::uint64_t seed, bool probe) {
  cloven::CloVenModel model = cloven::load_checkpoint(checkpoint);
  const cloven::MultiViewDataset data = cloven::load_dataset(manifest);
  cloven::EvalOptions opts;
  opts.seed = seed;
  opts.classification = probe && data.has_labels();
  const cloven::MetricsReport report =
      cloven::evaluate_clustering(model, data, opts);
  std::cout << cloven::metrics_to_json(report) << "\n"
            << cloven::metrics_to_table(report);
  return kExitOk;
}

int cmd_corrupt_sweep(const cloven::ExperimentConfig& cfg,
                      const std::string& scenario,
                      const std::vector<double>& rates) {
  const cloven::Scenario s = scenario == "TITI" ? cloven::Scenario::kTITI
                                                : cloven::Scenario::kTCTI;
  const cloven::SweepResult result =
      cloven::run_corruption_sweep(cfg, s, rates);
  std::cout << "sweep finished: " << result.points.size() << " cells";
  if (!result.csv.empty()) std::cout << " -> " << result.csv.string();
  std::cout << "\n";
  for (double r : rates) {
    std::cout << "  rate " << r << " mean ACC " << result.mean_acc(r) << "\n";
  }
  return kExitOk;
}

int cmd_ablate(const cloven::ExperimentConfig& cfg, const std::string& axis) {
  const cloven::AblationAxis a = axis == "fusion_layers"
                                     ? cloven::AblationAxis::kFusionLayers
                                     : cloven::AblationAxis::kLossTerms;
  const cloven::AblationResult result = cloven::run_ablation(cfg, a);
  std::cout << "ablation finished: " << result.cells.size() << " cells";
  if (!result.csv.empty()) std::cout << " -> " << result.csv.string();
  std::cout << "\n";
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, bool dump_graph) {
  if (dump_graph) {
    // One tiny objective, printed as the op tape.
    cloven::Graph tape;
    cloven::Rng rng(seed);
    cloven::Tensor x(2, 3, {0.1, -0.4, 0.7, 0.3, -0.2, 0.5}, true);
    cloven::Tensor loss =
        cloven::sum(cloven::softmax_rows(x) * cloven::exp(x));
    tape.backward(loss);
    std::cout << tape.dump();
  }
  const auto entries = cloven::run_gradcheck_suite(seed);
  bool all_pass = true;
  for (const auto& e : entries) {
    std::printf("%-32s max rel err %.3e  %s\n", e.name.c_str(), e.max_rel_err,
                e.pass() ? "PASS" : "FAIL");
    all_pass = all_pass && e.pass();
  }
  return all_pass ? kExitOk : kExitVerification;
}

int cmd_export(const std::string& checkpoint, const std::string& manifest,
               const std::string& out) {
  cloven::CloVenModel model = cloven::load_checkpoint(checkpoint);
  const cloven::MultiViewDataset data = cloven::load_dataset(manifest);
  cloven::export_embeddings(model, data, out);
  std::cout << "embeddings written to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "cloven: clustering-guided contrastive fusion for multi-view "
      "representation learning"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-view dataset");
  cloven::SynthConfig synth_cfg;
  std::string synth_out = (default_output_root() / "synth").string();
  std::vector<std::size_t> synth_dims;
  synth->add_option("--k", synth_cfg.clusters, "clusters (>= 2)");
  synth->add_option("--n", synth_cfg.samples, "samples");
  synth->add_option("--views", synth_cfg.views, "views");
  synth->add_option("--dims", synth_dims, "per-view feature widths");
  synth->add_option("--noise", synth_cfg.noise, "per-view Gaussian noise");
  synth->add_option("--scale", synth_cfg.scale, "cluster separation scale");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("-o,--out", synth_out, "output directory");

  // train
  auto* train = app.add_subcommand("train", "run the full training protocol");
  CommonFlags train_flags;
  add_common_flags(train, train_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_checkpoint, eval_manifest;
  std::uint64_t eval_seed = 0;
  bool eval_probe = false;
  eval->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
  eval->add_option("--data", eval_manifest, "dataset manifest JSON")->required();
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_flag("--probe", eval_probe, "also run the 8:2 linear probe");

  // corrupt-sweep
  auto* sweep = app.add_subcommand(
      "corrupt-sweep", "incomplete-view robustness sweep (TCTI or TITI)");
  CommonFlags sweep_flags;
  add_common_flags(sweep, sweep_flags);
  std::string sweep_scenario = "TCTI";
  std::string sweep_rates = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7";
  sweep->add_option("--scenario", sweep_scenario, "TCTI | TITI")
      ->check(CLI::IsMember({"TCTI", "TITI"}));
  sweep->add_option("--rates", sweep_rates, "comma-separated missing rates");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "loss-term or fusion-depth ablation");
  CommonFlags ablate_flags;
  add_common_flags(ablate, ablate_flags);
  std::string ablate_axis = "loss_terms";
  ablate->add_option("--axis", ablate_axis, "loss_terms | fusion_layers")
      ->check(CLI::IsMember({"loss_terms", "fusion_layers"}));

  // gradcheck
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference verification of every op and loss");
  std::uint64_t gradcheck_seed = 20240501;
  bool dump_graph = false;
  gradcheck->add_option("--seed", gradcheck_seed, "random instance seed");
  gradcheck->add_flag("--dump-graph", dump_graph,
                      "print a sample op tape before the checks");

  // export-embeddings
  auto* exp = app.add_subcommand("export-embeddings",
                                 "write Z, per-view H, and assignments");
  std::string exp_checkpoint, exp_manifest;
  std::string exp_out = (default_output_root() / "embeddings").string();
  exp->add_option("--checkpoint", exp_checkpoint, "model checkpoint")->required();
  exp->add_option("--data", exp_manifest, "dataset manifest JSON")->required();
  exp->add_option("-o,--out", exp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) {
      if (!synth_dims.empty()) synth_cfg.dims = synth_dims;
      return cmd_synth(synth_cfg, synth_out);
    }
    if (*train) {
      auto cfg = resolve_config(train_flags);
      return cfg ? cmd_train(*cfg) : kExitUsage;
    }
    if (*eval) return cmd_eval(eval_checkpoint, eval_manifest, eval_seed, eval_probe);
    if (*sweep) {
      auto cfg = resolve_config(sweep_flags);
      if (!cfg) return kExitUsage;
      return cmd_corrupt_sweep(*cfg, sweep_scenario, parse_rates(sweep_rates));
    }
    if (*ablate) {
      auto cfg = resolve_config(ablate_flags);
      return cfg ? cmd_ablate(*cfg, ablate_axis) : kExitUsage;
    }
    if (*gradcheck) return cmd_gradcheck(gradcheck_seed, dump_graph);
    if (*exp) return cmd_export(exp_checkpoint, exp_manifest, exp_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cloven::TrainingAborted& e) {
    std::cerr << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
