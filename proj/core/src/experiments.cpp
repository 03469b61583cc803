#include "cloven/experiments.hpp"

#include <cstdio>
#include <fstream>

#include "cloven/checkpoint.hpp"
#include "json.hpp"

namespace cloven {

namespace {

// Every cell of a sweep derives its corruption seed from the training seed
// and the rate index, so any cell can be reproduced in isolation.
std::uint64_t cell_seed(std::uint64_t train_seed, std::size_t rate_index) {
  return Rng::fork(train_seed, 1000 + rate_index).next_u64();
}

CloVenModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  Rng init = Rng::fork(seed, 7);  // same stream multi_seed uses
  return CloVenModel(cfg, init);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

std::string format_row(std::initializer_list<double> values) {
  std::string row;
  char buf[64];
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    if (!row.empty()) row += ",";
    row += buf;
  }
  return row;
}

}  // namespace

TrainOutcome run_training_experiment(const ExperimentConfig& cfg) {
  MultiViewDataset clean = cfg.load_data();

  // TITI corrupts the training stream as well; TCTI trains clean.
  MultiViewDataset train_data = clean;
  MultiViewDataset eval_data = clean;
  if (cfg.corruption && cfg.corruption->missing_rate > 0.0) {
    CorruptResult corrupted = corrupt(clean, *cfg.corruption);
    eval_data = corrupted.data;
    if (cfg.corruption->scenario == Scenario::kTITI) {
      train_data = std::move(corrupted.data);
    }
  }

  TrainConfig train_cfg = cfg.train;
  train_cfg.output_dir = cfg.output_dir;

  TrainOutcome outcome;
  outcome.runs = multi_seed(train_data, cfg.model, train_cfg, cfg.loss);

  EvalOptions opts;
  opts.seed = outcome.runs.best().seed;
  opts.classification = eval_data.has_labels();
  outcome.metrics =
      evaluate_clustering(*outcome.runs.best_model, eval_data, opts);
  outcome.metrics.seed = outcome.runs.best().seed;
  outcome.metrics.epoch = train_cfg.epochs;
  outcome.metrics.loss = outcome.runs.best().final_loss;

  if (!cfg.output_dir.empty()) {
    write_text(cfg.output_dir / "config.resolved.json",
               experiment_config_to_json(cfg) + "\n");
    write_text(cfg.output_dir / "metrics.json",
               metrics_to_json(outcome.metrics) + "\n");
    write_text(cfg.output_dir / "metrics.txt",
               metrics_to_table(outcome.metrics));
    nlohmann::json summary;
    summary["best_seed"] = outcome.runs.best().seed;
    summary["parameter_count"] = outcome.metrics.parameter_count;
    summary["fusion"] = cfg.model.fusion_kind == FusionKind::kVanilla
                            ? "vanilla"
                            : "residual";
    for (const RunRecord& r : outcome.runs.records) {
      summary["runs"].push_back({{"seed", r.seed},
                                 {"final_loss", r.final_loss},
                                 {"checkpoint", r.checkpoint.string()},
                                 {"log", r.log.string()}});
    }
    write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
  }
  return outcome;
}

double SweepResult::mean_acc(double rate) const {
  double acc = 0.0;
  std::size_t count = 0;
  for (const SweepPoint& p : points) {
    if (p.rate == rate) {
      acc += p.metrics.acc;
      ++count;
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

SweepResult run_corruption_sweep(const ExperimentConfig& cfg,
                                 Scenario scenario,
                                 const std::vector<double>& rates) {
  for (double r : rates) {
    if (r < 0.0 || r >= 1.0) {
      detail::fail_contract("sweep: rates must lie in [0, 1)");
    }
  }
  const MultiViewDataset clean = cfg.load_data();
  const FillPolicy fill =
      cfg.corruption ? cfg.corruption->fill : FillPolicy::kZero;

  TrainConfig cell_cfg = cfg.train;
  cell_cfg.output_dir.clear();  // cells stay in memory; the CSV is the artifact

  SweepResult result;
  result.scenario = scenario;

  for (std::uint64_t seed : cfg.train.seed_list()) {
    if (scenario == Scenario::kTCTI) {
      // One clean training per seed, evaluated at every rate.
      CloVenModel model = init_model(cfg.model, seed);
      train_one(model, clean, cell_cfg, cfg.loss, seed);
      for (std::size_t ri = 0; ri < rates.size(); ++ri) {
        CorruptionSpec spec{scenario, rates[ri], fill, cell_seed(seed, ri)};
        CorruptResult corrupted = corrupt(clean, spec);
        EvalOptions opts;
        opts.seed = seed;
        const MetricsReport m =
            evaluate_clustering(model, corrupted.data, opts);
        result.points.push_back(SweepPoint{rates[ri], seed, m.kmeans_on_fused});
      }
    } else {
      for (std::size_t ri = 0; ri < rates.size(); ++ri) {
        CorruptionSpec spec{scenario, rates[ri], fill, cell_seed(seed, ri)};
        CorruptResult corrupted = corrupt(clean, spec);
        CloVenModel model = init_model(cfg.model, seed);
        train_one(model, corrupted.data, cell_cfg, cfg.loss, seed);
        EvalOptions opts;
        opts.seed = seed;
        const MetricsReport m =
            evaluate_clustering(model, corrupted.data, opts);
        result.points.push_back(SweepPoint{rates[ri], seed, m.kmeans_on_fused});
      }
    }
  }

  if (!cfg.output_dir.empty()) {
    std::string csv = "rate,seed,acc,nmi,ari\n";
    for (const SweepPoint& p : result.points) {
      char head[64];
      std::snprintf(head, sizeof(head), "%g,%llu,", p.rate,
                    static_cast<unsigned long long>(p.seed));
      csv += head;
      csv += format_row({p.metrics.acc, p.metrics.nmi, p.metrics.ari});
      csv += "\n";
    }
    result.csv = cfg.output_dir /
                 (scenario == Scenario::kTCTI ? "sweep_tcti.csv"
                                              : "sweep_titi.csv");
    write_text(result.csv, csv);
  }
  return result;
}

double AblationResult::mean_acc(const std::string& label) const {
  double acc = 0.0;
  std::size_t count = 0;
  for (const AblationCell& c : cells) {
    if (c.label == label) {
      acc += c.clustering.acc;
      ++count;
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

AblationResult run_ablation(const ExperimentConfig& cfg, AblationAxis axis) {
  const MultiViewDataset data = cfg.load_data();

  struct Case {
    std::string label;
    bool icl, ccl, ddc, asym;
    std::size_t layers;
  };
  std::vector<Case> cases;
  const std::size_t base_layers = cfg.model.fusion_layers;
  if (axis == AblationAxis::kLossTerms) {
    // The loss-term grid: the full configuration plus every toggle the
    // component study reports, including the no-asymmetry variants.
    cases = {
        {"Baseline", true, true, true, true, base_layers},
        {"icl-only", true, false, false, true, base_layers},
        {"ccl-only", false, true, false, true, base_layers},
        {"icl+ccl-sym", true, true, false, false, base_layers},
        {"wo-ddc", true, true, false, true, base_layers},
        {"ddc-only", false, false, true, true, base_layers},
        {"wo-asym", true, true, true, false, base_layers},
        {"wo-icl", false, true, true, true, base_layers},
        {"wo-ccl", true, false, true, true, base_layers},
    };
  } else {
    for (std::size_t layers = 1; layers <= 4; ++layers) {
      cases.push_back(Case{"L=" + std::to_string(layers), true, true, true,
                           true, layers});
    }
  }

  TrainConfig cell_cfg = cfg.train;
  cell_cfg.output_dir.clear();

  AblationResult result;
  for (const Case& c : cases) {
    ModelConfig model_cfg = cfg.model;
    model_cfg.fusion_layers = c.layers;
    LossConfig loss_cfg = cfg.loss;
    loss_cfg.use_icl = c.icl;
    loss_cfg.use_ccl = c.ccl;
    loss_cfg.use_ddc = c.ddc;
    loss_cfg.asymmetric = c.asym;
    for (std::uint64_t seed : cfg.train.seed_list()) {
      CloVenModel model = init_model(model_cfg, seed);
      train_one(model, data, cell_cfg, loss_cfg, seed);
      EvalOptions opts;
      opts.seed = seed;
      opts.classification = data.has_labels();
      const MetricsReport m = evaluate_clustering(model, data, opts);
      AblationCell cell;
      cell.label = c.label;
      cell.icl = c.icl;
      cell.ccl = c.ccl;
      cell.ddc = c.ddc;
      cell.asymmetric = c.asym;
      cell.fusion_layers = c.layers;
      cell.seed = seed;
      cell.clustering = m.kmeans_on_fused;
      if (m.classification) cell.classification = *m.classification;
      result.cells.push_back(std::move(cell));
    }
  }

  if (!cfg.output_dir.empty()) {
    std::string csv =
        "case,icl,ccl,ddc,asym,fusion_layers,seed,acc,nmi,ari,acc_cls,"
        "precision,fscore\n";
    for (const AblationCell& c : result.cells) {
      char head[160];
      std::snprintf(head, sizeof(head), "%s,%d,%d,%d,%d,%zu,%llu,",
                    c.label.c_str(), c.icl ? 1 : 0, c.ccl ? 1 : 0,
                    c.ddc ? 1 : 0, c.asymmetric ? 1 : 0, c.fusion_layers,
                    static_cast<unsigned long long>(c.seed));
      csv += head;
      csv += format_row({c.clustering.acc, c.clustering.nmi, c.clustering.ari,
                         c.classification.acc, c.classification.precision,
                         c.classification.fscore});
      csv += "\n";
    }
    result.csv = cfg.output_dir /
                 (axis == AblationAxis::kLossTerms ? "ablation_loss_terms.csv"
                                                   : "ablation_fusion_layers.csv");
    write_text(result.csv, csv);
  }
  return result;
}

void export_embeddings(CloVenModel& model, const MultiViewDataset& data,
                       const std::filesystem::path& out_dir) {
  const Embeddings emb = extract_embeddings(model, data);
  std::filesystem::create_directories(out_dir);
  nlohmann::json index;
  save_matrix(emb.fused, out_dir / "fused.bin");
  index["fused"] = "fused.bin";
  for (std::size_t v = 0; v < emb.view_repr.size(); ++v) {
    const std::string name = "view" + std::to_string(v) + ".bin";
    save_matrix(emb.view_repr[v], out_dir / name);
    index["views"].push_back(name);
  }
  save_matrix(emb.fused_assign, out_dir / "assignments.bin");
  index["assignments"] = "assignments.bin";
  if (data.has_labels()) {
    std::ofstream labels(out_dir / "labels.txt", std::ios::trunc);
    for (int l : data.labels) labels << l << "\n";
    index["labels"] = "labels.txt";
  }
  write_text(out_dir / "embeddings.json", index.dump(2) + "\n");
}

}  // namespace cloven
