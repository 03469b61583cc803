#include "cloven/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset binaries are little-endian");

namespace cloven {

namespace {

[[noreturn]] void fail_load(const std::string& what) {
  throw std::runtime_error("dataset: " + what);
}

Tensor read_view_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_load("cannot open " + path.string());
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in) fail_load("truncated header in " + path.string());
  std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) fail_load("truncated payload in " + path.string());
  std::vector<double> data(buf.begin(), buf.end());
  return Tensor(rows, cols, std::move(data));
}

void write_view_bin(const Tensor& view, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_load("cannot write " + path.string());
  const std::uint32_t rows = static_cast<std::uint32_t>(view.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(view.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  std::vector<float> buf;
  buf.reserve(view.size());
  for (double v : view.values()) buf.push_back(static_cast<float>(v));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Tensor read_view_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_load("cannot open " + path.string());
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t this_cols = 0;
    while (std::getline(row, cell, ',')) {
      data.push_back(static_cast<double>(std::stof(cell)));
      ++this_cols;
    }
    if (cols == 0) {
      cols = this_cols;
    } else if (cols != this_cols) {
      fail_load("ragged csv row in " + path.string());
    }
    ++rows;
  }
  if (rows == 0) fail_load("empty csv file " + path.string());
  return Tensor(rows, cols, std::move(data));
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_load("cannot open label file " + path.string());
  std::vector<int> labels;
  int v = 0;
  while (in >> v) labels.push_back(v);
  return labels;
}

}  // namespace

void save_matrix(const Tensor& m, const std::filesystem::path& path) {
  write_view_bin(m, path);
}

Tensor load_matrix(const std::filesystem::path& path) {
  return read_view_bin(path);
}

std::size_t MultiViewDataset::class_count() const {
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return static_cast<std::size_t>(mx + 1);
}

MultiViewDataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) fail_load("cannot open manifest " + manifest.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_load("manifest parse error: " + std::string(e.what()));
  }
  const auto base = manifest.parent_path();

  MultiViewDataset data;
  data.name = j.value("name", manifest.stem().string());
  const std::string dtype = j.value("dtype", "f32");
  if (dtype != "f32") fail_load("unknown dtype '" + dtype + "'");
  const auto paths = j.at("views").get<std::vector<std::string>>();
  const auto dims = j.at("dims").get<std::vector<std::size_t>>();
  if (paths.size() != dims.size()) {
    fail_load("manifest lists " + std::to_string(paths.size()) +
              " views but " + std::to_string(dims.size()) + " dims");
  }
  for (std::size_t v = 0; v < paths.size(); ++v) {
    const auto path = base / paths[v];
    Tensor view = path.extension() == ".csv" ? read_view_csv(path)
                                             : read_view_bin(path);
    if (view.cols() != dims[v]) {
      fail_load("view " + std::to_string(v) + " has " +
                std::to_string(view.cols()) + " columns, manifest says " +
                std::to_string(dims[v]));
    }
    if (!data.views.empty() && view.rows() != data.samples()) {
      fail_load("view " + std::to_string(v) + " has " +
                std::to_string(view.rows()) + " rows, expected " +
                std::to_string(data.samples()));
    }
    data.views.push_back(std::move(view));
  }
  if (j.contains("labels")) {
    data.labels = read_labels(base / j.at("labels").get<std::string>());
    if (data.labels.size() != data.samples()) {
      fail_load("label count " + std::to_string(data.labels.size()) +
                " does not match sample count " +
                std::to_string(data.samples()));
    }
    for (int l : data.labels) {
      if (l < 0) fail_load("labels must be nonnegative");
    }
  }
  return data;
}

std::filesystem::path save_dataset(const MultiViewDataset& data,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["name"] = data.name;
  j["dtype"] = "f32";
  std::vector<std::string> paths;
  std::vector<std::size_t> dims;
  for (std::size_t v = 0; v < data.views.size(); ++v) {
    const std::string fname = "view" + std::to_string(v) + ".bin";
    write_view_bin(data.views[v], dir / fname);
    paths.push_back(fname);
    dims.push_back(data.views[v].cols());
  }
  j["views"] = paths;
  j["dims"] = dims;
  if (data.has_labels()) {
    std::ofstream out(dir / "labels.txt", std::ios::trunc);
    for (int l : data.labels) out << l << "\n";
    j["labels"] = "labels.txt";
  }
  const auto manifest = dir / (data.name + ".json");
  std::ofstream out(manifest, std::ios::trunc);
  out << j.dump(2) << "\n";
  return manifest;
}

MultiViewDataset synth_gaussian_multiview(const SynthConfig& cfg) {
  if (cfg.clusters < 2) {
    detail::fail_contract("synth: clusters must be >= 2");
  }
  if (cfg.views < 1 || cfg.samples < cfg.clusters) {
    detail::fail_contract("synth: need at least one view and one sample per cluster");
  }
  std::vector<std::size_t> dims = cfg.dims;
  if (dims.empty()) dims.assign(cfg.views, 10);
  if (dims.size() != cfg.views) {
    detail::fail_contract("synth: dims must list one width per view");
  }

  MultiViewDataset data;
  data.name = "synth-k" + std::to_string(cfg.clusters) + "-n" +
              std::to_string(cfg.samples) + "-v" + std::to_string(cfg.views) +
              "-s" + std::to_string(cfg.seed);
  data.labels.resize(cfg.samples);
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    data.labels[i] = static_cast<int>(i % cfg.clusters);
  }

  // Every sample's latent is its cluster's scaled simplex corner; each view
  // applies one fixed random linear map and adds independent Gaussian noise.
  // With zero noise, same-cluster rows are identical in every view.
  const std::size_t latent_dim = cfg.clusters;
  Rng map_rng = Rng::fork(cfg.seed, 1);
  Rng noise_rng = Rng::fork(cfg.seed, 2);
  for (std::size_t v = 0; v < cfg.views; ++v) {
    const std::size_t d = dims[v];
    std::vector<double> transform(latent_dim * d);
    const double col_scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
    for (auto& t : transform) t = map_rng.normal() * col_scale;
    std::vector<double> rows(cfg.samples * d);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
      const std::size_t c = static_cast<std::size_t>(data.labels[i]);
      for (std::size_t jj = 0; jj < d; ++jj) {
        // The latent is scale * e_c, so the map reduces to one of its rows.
        double value = cfg.scale * transform[c * d + jj];
        if (cfg.noise > 0.0) value += cfg.noise * noise_rng.normal();
        // Quantize through f32 so files round-trip bit-exactly.
        rows[i * d + jj] = static_cast<double>(static_cast<float>(value));
      }
    }
    data.views.emplace_back(cfg.samples, d, std::move(rows));
  }
  return data;
}

CorruptResult corrupt(const MultiViewDataset& data,
                      const CorruptionSpec& spec) {
  if (spec.missing_rate < 0.0 || spec.missing_rate >= 1.0) {
    detail::fail_contract("corrupt: missing rate must lie in [0, 1)");
  }
  CorruptResult out;
  out.data.name = data.name;
  out.data.labels = data.labels;
  for (const Tensor& v : data.views) {
    out.data.views.emplace_back(v.rows(), v.cols(), v.values());
  }
  if (spec.missing_rate == 0.0) return out;

  Rng pick = Rng::fork(spec.seed, 11);
  Rng fill = Rng::fork(spec.seed, 13);
  const std::size_t views = data.view_count();
  for (std::size_t i = 0; i < data.samples(); ++i) {
    if (pick.uniform() >= spec.missing_rate) continue;
    const std::size_t v = static_cast<std::size_t>(pick.below(views));
    auto& values = out.data.views[v].raw_values();
    const std::size_t d = out.data.views[v].cols();
    for (std::size_t j = 0; j < d; ++j) {
      double filled = 0.0;
      if (spec.fill == FillPolicy::kGaussianNoise) {
        filled = static_cast<double>(static_cast<float>(fill.normal()));
      }
      values[i * d + j] = filled;
    }
    out.mask.entries.emplace_back(i, v);
  }
  return out;
}

BatchIterator::BatchIterator(std::size_t samples, std::size_t batch_size,
                             std::uint64_t seed, bool drop_last)
    : samples_(samples), batch_size_(batch_size), seed_(seed),
      drop_last_(drop_last) {
  if (batch_size < 2) {
    detail::fail_contract("batches: batch size must be >= 2");
  }
}

std::size_t BatchIterator::batches_per_epoch() const {
  return drop_last_ ? samples_ / batch_size_
                    : (samples_ + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch(
    std::uint64_t epoch_index) const {
  std::vector<std::size_t> order(samples_);
  for (std::size_t i = 0; i < samples_; ++i) order[i] = i;
  Rng rng = Rng::fork(seed_, epoch_index);
  for (std::size_t i = samples_; i > 1; --i) {  // Fisher-Yates
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < samples_; start += batch_size_) {
    const std::size_t end = std::min(start + batch_size_, samples_);
    if (drop_last_ && end - start < batch_size_) break;
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

MultiViewBatch gather_batch(const MultiViewDataset& data,
                            const std::vector<std::size_t>& indices) {
  MultiViewBatch batch;
  batch.indices = indices;
  for (const Tensor& view : data.views) {
    const std::size_t d = view.cols();
    std::vector<double> rows(indices.size() * d);
    const auto& values = view.values();
    for (std::size_t i = 0; i < indices.size(); ++i) {
      std::copy_n(&values[indices[i] * d], d, &rows[i * d]);
    }
    batch.views.emplace_back(indices.size(), d, std::move(rows));
  }
  if (data.has_labels()) {
    batch.labels.reserve(indices.size());
    for (std::size_t i : indices) batch.labels.push_back(data.labels[i]);
  }
  return batch;
}

}  // namespace cloven
