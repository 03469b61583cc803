#include "cloven/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cloven/checkpoint.hpp"
#include "json.hpp"

namespace cloven {

namespace {

constexpr std::uint64_t kInitStream = 7;
constexpr std::uint64_t kShuffleStream = 17;
constexpr std::uint64_t kDropoutStream = 23;

static const char kResumeMagic[8] = {'C', 'L', 'V', 'N', 'T', 'R', 'S', 'T'};

nlohmann::json breakdown_to_json(const LossBreakdown& b) {
  nlohmann::json j;
  j["icl"] = b.icl;
  j["ccl"] = b.ccl;
  j["entropy"] = b.entropy;
  j["contrast"] = b.contrast;
  j["ddc_term1"] = b.ddc_term1;
  j["ddc_term2"] = b.ddc_term2;
  j["ddc_term3"] = b.ddc_term3;
  j["ddc"] = b.ddc;
  j["total"] = b.total;
  return j;
}

struct ResumeState {
  std::size_t next_epoch = 0;
  AdamState adam;
  Rng::State dropout_rng;
};

void save_resume(const ResumeState& rs, const CloVenModel& model,
                 const std::filesystem::path& path) {
  BlobFile file;
  nlohmann::json j;
  j["next_epoch"] = rs.next_epoch;
  j["adam_step"] = rs.adam.step;
  j["dropout_counter"] = rs.dropout_rng.counter;
  j["dropout_has_cached"] = rs.dropout_rng.has_cached;
  j["dropout_cached"] = rs.dropout_rng.cached;
  file.json_header = j.dump();
  const NamedParams params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    file.blobs["adam_m/" + params[i].first] =
        BlobFile::Blob{1, rs.adam.m[i].size(), rs.adam.m[i]};
    file.blobs["adam_v/" + params[i].first] =
        BlobFile::Blob{1, rs.adam.v[i].size(), rs.adam.v[i]};
  }
  write_blob_file(file, path, kResumeMagic);
}

ResumeState load_resume(const std::filesystem::path& path,
                        const CloVenModel& model) {
  BlobFile file = read_blob_file(path, kResumeMagic);
  const nlohmann::json j = nlohmann::json::parse(file.json_header);
  ResumeState rs;
  rs.next_epoch = j.at("next_epoch").get<std::size_t>();
  rs.adam.step = j.at("adam_step").get<std::uint64_t>();
  rs.dropout_rng.counter = j.at("dropout_counter").get<std::uint64_t>();
  rs.dropout_rng.has_cached = j.at("dropout_has_cached").get<bool>();
  rs.dropout_rng.cached = j.at("dropout_cached").get<double>();
  const NamedParams params = model.parameters();
  for (const auto& [name, tensor] : params) {
    rs.adam.m.push_back(file.blobs.at("adam_m/" + name).data);
    rs.adam.v.push_back(file.blobs.at("adam_v/" + name).data);
  }
  return rs;
}

}  // namespace

void TrainConfig::validate() const {
  if (lr <= 0.0) detail::fail_contract("train config: lr must be positive");
  if (epochs < 1) detail::fail_contract("train config: epochs must be >= 1");
  if (batch_size < 2) {
    detail::fail_contract("train config: batch_size must be >= 2");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    detail::fail_contract("train config: betas must lie in (0, 1)");
  }
}

std::vector<std::uint64_t> TrainConfig::seed_list() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = 0; s < 10; ++s) out.push_back(base_seed + s);
  return out;
}

void adam_step(std::vector<Tensor>& params, AdamState& state,
               const TrainConfig& cfg) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    detail::fail_contract("adam: state and parameter lists disagree");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    if (state.m[t].size() != p.size()) {
      detail::fail_contract("adam: moment shape does not match parameter");
    }
    const std::vector<double>& g = p.raw_grad();  // zeros if never populated
    auto& m = state.m[t];
    auto& v = state.v[t];
    auto& w = p.raw_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

RunRecord train_one(CloVenModel& model, const MultiViewDataset& data,
                    const TrainConfig& train_cfg, const LossConfig& loss_cfg,
                    std::uint64_t seed, SimilarityAudit* audit,
                    const std::optional<std::filesystem::path>& resume_from) {
  train_cfg.validate();
  loss_cfg.validate();

  RunRecord record;
  record.seed = seed;

  const bool persist = !train_cfg.output_dir.empty();
  std::filesystem::path run_dir;
  std::ofstream log;
  if (persist) {
    run_dir = train_cfg.output_dir / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(run_dir);
    record.log = run_dir / "train_log.jsonl";
    const bool append = resume_from.has_value();
    log.open(record.log, append ? std::ios::app : std::ios::trunc);
  }

  std::vector<Tensor> params = model.parameter_list();
  AdamState adam;
  Rng dropout_rng = Rng::fork(seed, kDropoutStream);
  std::size_t start_epoch = 0;
  if (resume_from) {
    ResumeState rs = load_resume(*resume_from, model);
    adam = std::move(rs.adam);
    dropout_rng.restore(rs.dropout_rng);
    start_epoch = rs.next_epoch;
    record.epoch_means.resize(start_epoch);  // earlier epochs not replayed
  }

  BatchIterator batches(data.samples(), train_cfg.batch_size,
                        Rng::fork(seed, kShuffleStream).next_u64(),
                        /*drop_last=*/true);

  for (std::size_t epoch = start_epoch; epoch < train_cfg.epochs; ++epoch) {
    const auto plan = batches.epoch(epoch);
    LossBreakdown epoch_sum;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < plan.size(); ++b) {
      MultiViewBatch batch = gather_batch(data, plan[b]);
      Graph tape;
      ForwardProducts fwd =
          model.forward(batch.views, Mode::kTrain, &dropout_rng);
      TotalLoss loss = total_loss(fwd, loss_cfg, audit);
      if (!std::isfinite(loss.parts.total)) {
        std::ostringstream msg;
        msg << "training aborted: non-finite loss at epoch " << epoch
            << " step " << b << "; batch indices";
        for (std::size_t i : plan[b]) msg << " " << i;
        throw TrainingAborted(msg.str(), epoch, b);
      }
      for (Tensor& p : params) p.zero_grad();
      tape.backward(loss.value);
      adam_step(params, adam, train_cfg);

      if (persist) {
        nlohmann::json line = breakdown_to_json(loss.parts);
        line["epoch"] = epoch;
        line["step"] = b;
        log << line.dump() << "\n";
      }
      const LossBreakdown& p = loss.parts;
      epoch_sum.icl += p.icl;
      epoch_sum.ccl += p.ccl;
      epoch_sum.entropy += p.entropy;
      epoch_sum.contrast += p.contrast;
      epoch_sum.ddc_term1 += p.ddc_term1;
      epoch_sum.ddc_term2 += p.ddc_term2;
      epoch_sum.ddc_term3 += p.ddc_term3;
      epoch_sum.ddc += p.ddc;
      epoch_sum.total += p.total;
      ++steps;
    }
    if (steps == 0) {
      detail::fail_contract(
          "train: batch size larger than the dataset leaves no batches");
    }
    LossBreakdown epoch_mean = epoch_sum;
    const double inv = 1.0 / static_cast<double>(steps);
    epoch_mean.icl *= inv;
    epoch_mean.ccl *= inv;
    epoch_mean.entropy *= inv;
    epoch_mean.contrast *= inv;
    epoch_mean.ddc_term1 *= inv;
    epoch_mean.ddc_term2 *= inv;
    epoch_mean.ddc_term3 *= inv;
    epoch_mean.ddc *= inv;
    epoch_mean.total *= inv;
    record.epoch_means.push_back(epoch_mean);

    if (persist && train_cfg.checkpoint_every > 0 &&
        (epoch + 1) % train_cfg.checkpoint_every == 0) {
      const auto tag = "epoch_" + std::to_string(epoch + 1);
      save_checkpoint(model, run_dir / ("checkpoint_" + tag + ".clvn"));
      ResumeState rs{epoch + 1, adam, dropout_rng.state()};
      save_resume(rs, model, run_dir / ("resume_" + tag + ".clvn"));
    }
  }

  record.final_loss = record.epoch_means.back().total;
  if (persist) {
    record.checkpoint = run_dir / "checkpoint.clvn";
    save_checkpoint(model, record.checkpoint);
  }
  return record;
}

CloVenModel clone_model(const CloVenModel& model) {
  Rng rng(0);
  CloVenModel copy(model.config(), rng);
  const NamedParams src = model.parameters();
  NamedParams dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i].second.raw_values() = src[i].second.values();
  }
  const auto src_state = model.state();
  auto dst_state = copy.mutable_state();
  for (std::size_t i = 0; i < src_state.size(); ++i) {
    *dst_state[i].second = *src_state[i].second;
  }
  return copy;
}

std::size_t select_best_run(const std::vector<RunRecord>& records) {
  if (records.empty()) {
    detail::fail_contract("multi_seed: need at least one run");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const bool better =
        records[i].final_loss < records[best].final_loss ||
        (records[i].final_loss == records[best].final_loss &&
         records[i].seed < records[best].seed);
    if (better) best = i;
  }
  return best;
}

MultiSeedResult multi_seed(const MultiViewDataset& data,
                           const ModelConfig& model_cfg,
                           const TrainConfig& train_cfg,
                           const LossConfig& loss_cfg) {
  MultiSeedResult result;
  for (std::uint64_t seed : train_cfg.seed_list()) {
    Rng init = Rng::fork(seed, kInitStream);
    CloVenModel model(model_cfg, init);
    result.records.push_back(
        train_one(model, data, train_cfg, loss_cfg, seed));
    const std::size_t best = select_best_run(result.records);
    if (best + 1 == result.records.size()) {
      result.best_index = best;
      result.best_model = clone_model(model);
    }
  }
  return result;
}

}  // namespace cloven
