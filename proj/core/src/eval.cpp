#include "cloven/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cloven/train.hpp"
#include "json.hpp"

namespace cloven {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

// One k-means run: k-means++ seeding then Lloyd iteration.
KMeansResult kmeans_once(const Tensor& points, std::size_t k, Rng& rng,
                         std::size_t max_iter) {
  const std::size_t n = points.rows(), d = points.cols();
  const auto& x = points.values();

  std::vector<double> centroids(k * d);
  std::vector<double> min_dist(n, std::numeric_limits<double>::max());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy_n(&x[first * d], d, &centroids[0]);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] = std::min(min_dist[i],
                             sq_dist(&x[i * d], &centroids[(c - 1) * d], d));
      total += min_dist[i];
    }
    std::size_t chosen = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_dist[i];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<std::size_t>(rng.below(n));
    }
    std::copy_n(&x[chosen * d], d, &centroids[c * d]);
  }

  std::vector<int> labels(n, -1);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(&x[i * d], &centroids[0], d);
      for (std::size_t c = 1; c < k; ++c) {
        const double dist = sq_dist(&x[i * d], &centroids[c * d], d);
        if (dist < best_d) {
          best_d = dist;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    std::fill(centroids.begin(), centroids.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      counts[c] += 1;
      for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] += x[i * d + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster with the point farthest from its centroid
        // (only stealing from clusters that keep at least one member).
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const auto ci = static_cast<std::size_t>(labels[i]);
          if (counts[ci] <= 1) continue;
          const double dist = sq_dist(&x[i * d], &centroids[ci * d], d);
          if (dist > far_d) {
            far_d = dist;
            far = i;
          }
        }
        std::copy_n(&x[far * d], d, &centroids[c * d]);
        counts[c] = 1;
        continue;
      }
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] *= inv;
    }
  }

  KMeansResult out;
  out.labels = std::move(labels);
  out.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.inertia +=
        sq_dist(&x[i * d], &centroids[static_cast<std::size_t>(out.labels[i]) * d], d);
  }
  out.centroids = Tensor(k, d, std::move(centroids));
  return out;
}

struct Contingency {
  std::size_t ky = 0, kc = 0;
  std::vector<std::size_t> q;  // ky x kc counts
  std::vector<std::size_t> row;
  std::vector<std::size_t> col;
  std::size_t n = 0;
};

Contingency contingency(const std::vector<int>& y, const std::vector<int>& c) {
  if (y.size() != c.size()) {
    detail::fail_contract("metrics: partitions must have equal length");
  }
  Contingency t;
  t.n = y.size();
  for (std::size_t i = 0; i < y.size(); ++i) {
    t.ky = std::max(t.ky, static_cast<std::size_t>(y[i]) + 1);
    t.kc = std::max(t.kc, static_cast<std::size_t>(c[i]) + 1);
  }
  t.q.assign(t.ky * t.kc, 0);
  t.row.assign(t.ky, 0);
  t.col.assign(t.kc, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    t.q[static_cast<std::size_t>(y[i]) * t.kc + static_cast<std::size_t>(c[i])] += 1;
    t.row[static_cast<std::size_t>(y[i])] += 1;
    t.col[static_cast<std::size_t>(c[i])] += 1;
  }
  return t;
}

// Hungarian algorithm (shortest augmenting path with potentials) on a square
// cost matrix; returns the minimal total cost assignment.
std::vector<int> hungarian_min_cost(const std::vector<double>& cost,
                                    std::size_t n) {
  const double kInf = std::numeric_limits<double>::max();
  std::vector<double> u(n + 1), v(n + 1);
  std::vector<std::size_t> p(n + 1), way(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(n, -1);  // row -> column
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) match[p[j] - 1] = static_cast<int>(j - 1);
  }
  return match;
}

double xlogx_plain(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

double entropy_of_counts(const std::vector<std::size_t>& counts,
                         std::size_t n) {
  double h = 0.0;
  for (std::size_t c : counts) {
    h -= xlogx_plain(static_cast<double>(c) / static_cast<double>(n));
  }
  return h;
}

double choose2(double m) { return m * (m - 1.0) / 2.0; }

}  // namespace

KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter, std::size_t restarts) {
  if (k < 1) detail::fail_contract("kmeans: k must be >= 1");
  if (points.rows() < k) {
    detail::fail_contract("kmeans: need at least k points, got " +
                          std::to_string(points.rows()));
  }
  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r) {
    Rng rng = Rng::fork(seed, r);
    KMeansResult run = kmeans_once(points, k, rng, max_iter);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  return best;
}

double hungarian_acc(const std::vector<int>& truth,
                     const std::vector<int>& predicted) {
  const Contingency t = contingency(truth, predicted);
  const std::size_t n = std::max(t.ky, t.kc);
  // Maximize matches = minimize (max_count - count), padded square.
  double max_count = 0.0;
  for (std::size_t q : t.q) max_count = std::max(max_count, static_cast<double>(q));
  std::vector<double> cost(n * n, max_count);
  for (std::size_t c = 0; c < t.kc; ++c) {
    for (std::size_t y = 0; y < t.ky; ++y) {
      cost[c * n + y] = max_count - static_cast<double>(t.q[y * t.kc + c]);
    }
  }
  const std::vector<int> match = hungarian_min_cost(cost, n);
  std::size_t matched = 0;
  for (std::size_t c = 0; c < t.kc; ++c) {
    const auto y = static_cast<std::size_t>(match[c]);
    if (y < t.ky) matched += t.q[y * t.kc + c];
  }
  return static_cast<double>(matched) / static_cast<double>(t.n);
}

double nmi(const std::vector<int>& truth, const std::vector<int>& predicted) {
  const Contingency t = contingency(truth, predicted);
  const double hy = entropy_of_counts(t.row, t.n);
  const double hc = entropy_of_counts(t.col, t.n);
  if (hy == 0.0 && hc == 0.0) return 1.0;  // both partitions constant
  double mi = 0.0;
  const double n = static_cast<double>(t.n);
  for (std::size_t y = 0; y < t.ky; ++y) {
    for (std::size_t c = 0; c < t.kc; ++c) {
      const double q = static_cast<double>(t.q[y * t.kc + c]);
      if (q == 0.0) continue;
      mi += (q / n) * std::log(q * n / (static_cast<double>(t.row[y]) *
                                        static_cast<double>(t.col[c])));
    }
  }
  return mi / (0.5 * (hy + hc));
}

double ari(const std::vector<int>& truth, const std::vector<int>& predicted) {
  const Contingency t = contingency(truth, predicted);
  double index = 0.0;
  for (std::size_t q : t.q) index += choose2(static_cast<double>(q));
  double sum_row = 0.0, sum_col = 0.0;
  for (std::size_t a : t.row) sum_row += choose2(static_cast<double>(a));
  for (std::size_t b : t.col) sum_col += choose2(static_cast<double>(b));
  const double total = choose2(static_cast<double>(t.n));
  if (total == 0.0) return truth == predicted ? 1.0 : 0.0;
  const double expected = sum_row * sum_col / total;
  const double max_index = 0.5 * (sum_row + sum_col);
  if (max_index == expected) {
    // Degenerate: both partitions trivial in the same way.
    return index == expected ? 1.0 : 0.0;
  }
  return (index - expected) / (max_index - expected);
}

ProbeMetrics linear_probe(const Tensor& z_train,
                          const std::vector<int>& y_train,
                          const Tensor& z_test, const std::vector<int>& y_test,
                          const ProbeConfig& cfg) {
  if (z_train.rows() != y_train.size() || z_test.rows() != y_test.size()) {
    detail::fail_contract("probe: representation and label counts disagree");
  }
  int max_label = 0;
  for (int y : y_train) max_label = std::max(max_label, y);
  for (int y : y_test) max_label = std::max(max_label, y);
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;
  const std::size_t n = z_train.rows(), d = z_train.cols();

  std::vector<char> seen_in_train(classes, false);
  for (int y : y_train) seen_in_train[static_cast<std::size_t>(y)] = true;

  // One-hot targets and the off-target mask for the hinge terms.
  std::vector<double> onehot(n * classes, 0.0);
  std::vector<double> offmask(n * classes, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(y_train[i]);
    onehot[i * classes + y] = 1.0;
    offmask[i * classes + y] = 0.0;
  }
  const Tensor targets(n, classes, std::move(onehot));
  const Tensor mask(n, classes, std::move(offmask));

  Rng rng = Rng::fork(cfg.seed, 31);
  Tensor w = Tensor::rand_uniform(d, classes, 1.0 / std::sqrt(static_cast<double>(d)),
                                  rng, /*requires_grad=*/true);
  Tensor b = Tensor::zeros(1, classes, /*requires_grad=*/true);
  std::vector<Tensor> params{w, b};
  AdamState adam;
  TrainConfig opt;
  opt.lr = cfg.lr;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Graph tape;
    const Tensor scores = matmul(z_train, w) + b;
    const Tensor target_score = row_sum(scores * targets);  // n x 1
    // Weston-Watkins multiclass hinge.
    const Tensor margins = relu(scores - target_score + cfg.margin) * mask;
    const Tensor loss = sum(margins) / static_cast<double>(n);
    for (Tensor& p : params) p.zero_grad();
    tape.backward(loss);
    adam_step(params, adam, opt);
  }

  const Tensor scores = matmul(z_test, w) + b;
  std::vector<int> predicted(z_test.rows());
  for (std::size_t i = 0; i < z_test.rows(); ++i) {
    int best = 0;
    double best_s = scores.at(i, 0);
    for (std::size_t c = 1; c < classes; ++c) {
      if (scores.at(i, c) > best_s) {
        best_s = scores.at(i, c);
        best = static_cast<int>(c);
      }
    }
    predicted[i] = best;
  }

  ProbeMetrics out;
  std::vector<std::size_t> tp(classes), fp(classes), fn(classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto truth = static_cast<std::size_t>(y_test[i]);
    const auto pred = static_cast<std::size_t>(predicted[i]);
    if (truth == pred) {
      ++correct;
      ++tp[truth];
    } else {
      ++fp[pred];
      ++fn[truth];
    }
  }
  out.acc = predicted.empty()
                ? 0.0
                : static_cast<double>(correct) / static_cast<double>(predicted.size());
  out.per_class_precision.assign(classes, 0.0);
  out.per_class_recall.assign(classes, 0.0);
  out.per_class_fscore.assign(classes, 0.0);
  double macro_p = 0.0, macro_f = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (!seen_in_train[c]) {
      out.warnings.push_back("class " + std::to_string(c) +
                             " absent from training split; skipped in macro "
                             "averages");
      continue;
    }
    const double denom_p = static_cast<double>(tp[c] + fp[c]);
    const double denom_r = static_cast<double>(tp[c] + fn[c]);
    if (denom_p == 0.0) {
      out.warnings.push_back("class " + std::to_string(c) +
                             " has no predicted positives; precision set to 0");
    }
    const double p = denom_p > 0.0 ? static_cast<double>(tp[c]) / denom_p : 0.0;
    const double r = denom_r > 0.0 ? static_cast<double>(tp[c]) / denom_r : 0.0;
    const double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    out.per_class_precision[c] = p;
    out.per_class_recall[c] = r;
    out.per_class_fscore[c] = f;
    macro_p += p;
    macro_f += f;
    ++counted;
  }
  if (counted > 0) {
    out.precision = macro_p / static_cast<double>(counted);
    out.fscore = macro_f / static_cast<double>(counted);
  }
  return out;
}

Embeddings extract_embeddings(CloVenModel& model,
                              const MultiViewDataset& data) {
  Embeddings out;
  for (std::size_t v = 0; v < data.view_count(); ++v) {
    out.view_repr.push_back(model.encode_view(v, data.views[v]));
  }
  out.fused = model.fuse(out.view_repr, Mode::kEval, nullptr);
  out.fused_assign = model.cluster_assign(out.fused).first;
  return out;
}

MetricsReport evaluate_clustering(CloVenModel& model,
                                  const MultiViewDataset& data,
                                  const EvalOptions& opts) {
  if (!data.has_labels()) {
    detail::fail_contract("evaluate: dataset has no ground-truth labels");
  }
  const std::size_t k = data.class_count();
  const Embeddings emb = extract_embeddings(model, data);

  MetricsReport report;
  report.parameter_count = model.parameter_count();

  const KMeansResult km = kmeans(emb.fused, k, opts.seed, 100,
                                 opts.kmeans_restarts);
  report.kmeans_on_fused.acc = hungarian_acc(data.labels, km.labels);
  report.kmeans_on_fused.nmi = nmi(data.labels, km.labels);
  report.kmeans_on_fused.ari = ari(data.labels, km.labels);

  std::vector<int> head_labels(data.samples());
  const Tensor& assign = emb.fused_assign;
  for (std::size_t i = 0; i < data.samples(); ++i) {
    int best = 0;
    double best_p = assign.at(i, 0);
    for (std::size_t c = 1; c < assign.cols(); ++c) {
      if (assign.at(i, c) > best_p) {
        best_p = assign.at(i, c);
        best = static_cast<int>(c);
      }
    }
    head_labels[i] = best;
  }
  report.head_argmax.acc = hungarian_acc(data.labels, head_labels);
  report.head_argmax.nmi = nmi(data.labels, head_labels);
  report.head_argmax.ari = ari(data.labels, head_labels);

  if (opts.classification) {
    // Seeded 8:2 split over shuffled indices.
    std::vector<std::size_t> order(data.samples());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::fork(opts.seed, 41);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    const auto split =
        static_cast<std::size_t>(opts.train_fraction *
                                 static_cast<double>(order.size()));
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + split);
    std::vector<std::size_t> test_idx(order.begin() + split, order.end());

    auto take = [&](const std::vector<std::size_t>& idx) {
      const std::size_t d = emb.fused.cols();
      std::vector<double> rows(idx.size() * d);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(&emb.fused.values()[idx[i] * d], d, &rows[i * d]);
        labels[i] = data.labels[idx[i]];
      }
      return std::pair<Tensor, std::vector<int>>(
          Tensor(idx.size(), d, std::move(rows)), std::move(labels));
    };
    auto [z_train, y_train] = take(train_idx);
    auto [z_test, y_test] = take(test_idx);
    ProbeConfig pc;
    pc.seed = opts.seed;
    report.classification = linear_probe(z_train, y_train, z_test, y_test, pc);
  }
  return report;
}

std::string metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["clustering"]["kmeans_on_fused"] = {{"acc", report.kmeans_on_fused.acc},
                                        {"nmi", report.kmeans_on_fused.nmi},
                                        {"ari", report.kmeans_on_fused.ari}};
  j["clustering"]["head_argmax"] = {{"acc", report.head_argmax.acc},
                                    {"nmi", report.head_argmax.nmi},
                                    {"ari", report.head_argmax.ari}};
  if (report.classification) {
    j["classification"] = {{"acc", report.classification->acc},
                           {"precision", report.classification->precision},
                           {"fscore", report.classification->fscore}};
    if (!report.classification->warnings.empty()) {
      j["classification"]["warnings"] = report.classification->warnings;
    }
  }
  j["meta"] = {{"seed", report.seed},
               {"epoch", report.epoch},
               {"loss", report.loss},
               {"parameter_count", report.parameter_count}};
  return j.dump(2);
}

std::string metrics_to_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[128];
  out << "metric            ACC      NMI      ARI\n";
  std::snprintf(line, sizeof(line), "kmeans-on-Z   %8.4f %8.4f %8.4f\n",
                report.kmeans_on_fused.acc, report.kmeans_on_fused.nmi,
                report.kmeans_on_fused.ari);
  out << line;
  std::snprintf(line, sizeof(line), "head-argmax   %8.4f %8.4f %8.4f\n",
                report.head_argmax.acc, report.head_argmax.nmi,
                report.head_argmax.ari);
  out << line;
  if (report.classification) {
    out << "\nmetric            ACC        P  F-score\n";
    std::snprintf(line, sizeof(line), "linear-probe  %8.4f %8.4f %8.4f\n",
                  report.classification->acc, report.classification->precision,
                  report.classification->fscore);
    out << line;
  }
  return out.str();
}

}  // namespace cloven
