#include <algorithm>
#include <cmath>

#include "cloven/eval.hpp"
#include "cloven/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cloven;

TEST_CASE("kmeans recovers well-separated triples") {
  // Three tight groups far apart on a line.
  const Tensor points(9, 1,
                      {0.0, 0.1, -0.1, 10.0, 10.1, 9.9, 20.0, 20.1, 19.9});
  const KMeansResult result = kmeans(points, 3, /*seed=*/1);
  const std::vector<int> truth{0, 0, 0, 1, 1, 1, 2, 2, 2};
  CHECK(hungarian_acc(truth, result.labels) == 1.0);
  CHECK(result.inertia == doctest::Approx(0.06).epsilon(1e-6));
}

TEST_CASE("kmeans inertia never increases across Lloyd iterations") {
  // Indirect check: the returned fixpoint cannot be beaten by re-assigning.
  Rng rng(2);
  const Tensor points = Tensor::rand_uniform(60, 4, 1.0, rng);
  const KMeansResult result = kmeans(points, 4, 3);
  double reassigned = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = 1e300;
    for (std::size_t c = 0; c < 4; ++c) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        const double diff = points.at(i, j) - result.centroids.at(c, j);
        d2 += diff * diff;
      }
      best = std::min(best, d2);
    }
    reassigned += best;
  }
  CHECK(result.inertia == doctest::Approx(reassigned).epsilon(1e-9));
}

TEST_CASE("kmeans with k=1 returns the mean") {
  const Tensor points(4, 2, {0, 0, 2, 2, 4, 0, 2, -2});
  const KMeansResult result = kmeans(points, 1, 0);
  for (int l : result.labels) CHECK(l == 0);
  CHECK(result.centroids.at(0, 0) == doctest::Approx(2.0));
  CHECK(result.centroids.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("kmeans requires at least k points") {
  const Tensor points(2, 1, {0.0, 1.0});
  CHECK_THROWS_AS(kmeans(points, 3, 0), std::invalid_argument);
}

TEST_CASE("hungarian accuracy absorbs relabeling") {
  const std::vector<int> y{0, 0, 1, 1, 2, 2};
  CHECK(hungarian_acc(y, y) == 1.0);
  const std::vector<int> relabeled{2, 2, 0, 0, 1, 1};
  CHECK(hungarian_acc(y, relabeled) == 1.0);
  const std::vector<int> c{1, 1, 0, 2, 2, 2};
  CHECK(hungarian_acc(y, c) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("hungarian accuracy equals the brute-force maximum") {
  Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 6 + rng.below(20);
    const int ky = 2 + static_cast<int>(rng.below(5));  // up to 6
    const int kc = 2 + static_cast<int>(rng.below(5));
    std::vector<int> y(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.below(ky));
      c[i] = static_cast<int>(rng.below(kc));
    }
    CHECK(hungarian_acc(y, c) ==
          doctest::Approx(oracle::brute_force_acc(y, c)).epsilon(1e-12));
  }
}

TEST_CASE("nmi fixtures") {
  const std::vector<int> y{0, 0, 1, 1};
  CHECK(nmi(y, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nmi(y, {0, 1, 0, 1}) == doctest::Approx(0.0).epsilon(1e-12));

  // Hand-computed: I = 0.215761..., H(Y) = ln 2, H(C) = 0.562335...
  const double fixture = nmi(y, {0, 0, 0, 1});
  CHECK(fixture == doctest::Approx(0.34371101848545083).epsilon(1e-12));
  CHECK(fixture ==
        doctest::Approx(oracle::plogp_nmi(y, {0, 0, 0, 1})).epsilon(1e-12));

  // Constant partitions.
  CHECK(nmi({1, 1, 1}, {0, 0, 0}) == 1.0);
  CHECK(nmi({0, 1, 2}, {0, 0, 0}) == 0.0);

  // Symmetry and permutation invariance.
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> a(12), b(12);
    for (std::size_t i = 0; i < 12; ++i) {
      a[i] = static_cast<int>(rng.below(3));
      b[i] = static_cast<int>(rng.below(4));
    }
    CHECK(nmi(a, b) == doctest::Approx(nmi(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("ari fixtures and chance level") {
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  CHECK(ari(y, y) == 1.0);
  const std::vector<int> c{0, 0, 1, 1, 2, 2};
  CHECK(ari(y, c) == doctest::Approx(oracle::pair_count_ari(y, c)).epsilon(1e-12));
  CHECK(ari(y, c) == doctest::Approx(0.8 / 3.3).epsilon(1e-9));

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> a(15), b(15);
    for (std::size_t i = 0; i < 15; ++i) {
      a[i] = static_cast<int>(rng.below(3));
      b[i] = static_cast<int>(rng.below(3));
    }
    CHECK(ari(a, b) ==
          doctest::Approx(oracle::pair_count_ari(a, b)).epsilon(1e-12));
    CHECK(ari(a, b) == doctest::Approx(ari(b, a)).epsilon(1e-12));
  }

  // Independent large partitions sit near zero.
  std::vector<int> big_a(10000), big_b(10000);
  for (std::size_t i = 0; i < big_a.size(); ++i) {
    big_a[i] = static_cast<int>(rng.below(4));
    big_b[i] = static_cast<int>(rng.below(4));
  }
  CHECK(std::abs(ari(big_a, big_b)) <= 0.05);
}

TEST_CASE("identical partitions score exactly one on all three metrics") {
  Rng rng(8);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = static_cast<int>(rng.below(5));
  }
  CHECK(hungarian_acc(y, y) == 1.0);
  CHECK(nmi(y, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ari(y, y) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("linear probe separates separable blobs perfectly") {
  Rng rng(9);
  std::vector<double> rows;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    const double cx = label == 0 ? -3.0 : 3.0;
    rows.push_back(cx + rng.uniform(-0.5, 0.5));
    rows.push_back(rng.uniform(-0.5, 0.5));
    labels.push_back(label);
  }
  const Tensor z(40, 2, rows);
  const ProbeMetrics m = linear_probe(z, labels, z, labels);
  CHECK(m.acc == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.fscore == 1.0);
  CHECK(m.warnings.empty());
}

TEST_CASE("degenerate all-one-class predictions give the documented macros") {
  // Featureless balanced training keeps weights and biases at zero (the
  // hinge gradients cancel), so every test sample falls to class 0 by the
  // argmax tie-break.
  const Tensor z_train = Tensor::full(10, 2, 0.0);
  std::vector<int> y_train(10, 0);
  for (std::size_t i = 5; i < 10; ++i) y_train[i] = 1;
  const Tensor z_test = Tensor::full(10, 2, 0.0);
  std::vector<int> y_test = y_train;

  const ProbeMetrics m = linear_probe(z_train, y_train, z_test, y_test);
  CHECK(m.acc == doctest::Approx(0.5).epsilon(1e-12));
  // Class 0: precision 5/10. Class 1: no predicted positives, counted as 0
  // with a warning. Macro precision (0.5 + 0) / 2.
  CHECK(m.precision == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(!m.warnings.empty());

  // A class absent from training is skipped from the macro average instead.
  const std::vector<int> y_train_missing(10, 0);
  const ProbeMetrics m2 =
      linear_probe(z_train, y_train_missing, z_test, y_test);
  CHECK(m2.acc == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m2.precision == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(!m2.warnings.empty());
}

TEST_CASE("per-class f-scores recombine from precision and recall") {
  Rng rng(10);
  std::vector<double> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 3;
    rows.push_back(label + rng.uniform(-0.8, 0.8));
    rows.push_back(rng.uniform(-1.0, 1.0));
    labels.push_back(label);
  }
  const Tensor z(60, 2, rows);
  const ProbeMetrics m = linear_probe(z, labels, z, labels);
  for (std::size_t c = 0; c < m.per_class_fscore.size(); ++c) {
    const double p = m.per_class_precision[c];
    const double r = m.per_class_recall[c];
    const double expected = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    CHECK(m.per_class_fscore[c] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("evaluate_clustering reports chance-level or better and is symmetric") {
  SynthConfig synth_cfg;
  synth_cfg.clusters = 3;
  synth_cfg.samples = 120;
  synth_cfg.views = 2;
  synth_cfg.dims = {6, 6};
  synth_cfg.seed = 3;
  const MultiViewDataset data = synth_gaussian_multiview(synth_cfg);

  ModelConfig mc;
  mc.views = 2;
  mc.encoder_widths = {{6, 12, 8}, {6, 12, 8}};
  mc.common_dim = 8;
  mc.fusion_layers = 1;
  mc.clusters = 3;
  mc.clustering_hidden_width = 8;
  Rng init(4);
  CloVenModel model(mc, init);

  const MetricsReport report = evaluate_clustering(model, data);
  CHECK(report.kmeans_on_fused.acc >= 1.0 / 3.0 - 0.05);
  CHECK(report.head_argmax.acc >= 1.0 / 3.0 - 0.05);

  // Permuting dataset rows leaves the metrics unchanged.
  MultiViewDataset shuffled;
  shuffled.name = data.name;
  std::vector<std::size_t> perm(data.samples());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
  for (const Tensor& v : data.views) {
    std::vector<double> rows(v.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      std::copy_n(&v.values()[perm[i] * v.cols()], v.cols(),
                  &rows[i * v.cols()]);
    }
    shuffled.views.emplace_back(v.rows(), v.cols(), std::move(rows));
  }
  shuffled.labels.resize(data.samples());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.labels[i] = data.labels[perm[i]];
  }
  const MetricsReport report2 = evaluate_clustering(model, shuffled);
  CHECK(report2.kmeans_on_fused.acc ==
        doctest::Approx(report.kmeans_on_fused.acc).epsilon(1e-9));
  CHECK(report2.kmeans_on_fused.nmi ==
        doctest::Approx(report.kmeans_on_fused.nmi).epsilon(1e-9));
  CHECK(report2.kmeans_on_fused.ari ==
        doctest::Approx(report.kmeans_on_fused.ari).epsilon(1e-9));
}

TEST_CASE("metrics serialization carries both clustering columns") {
  MetricsReport report;
  report.kmeans_on_fused = {0.9, 0.8, 0.7};
  report.head_argmax = {0.5, 0.4, 0.3};
  const std::string json = metrics_to_json(report);
  CHECK(json.find("kmeans_on_fused") != std::string::npos);
  CHECK(json.find("head_argmax") != std::string::npos);
  const std::string table = metrics_to_table(report);
  CHECK(table.find("kmeans-on-Z") != std::string::npos);
  CHECK(table.find("0.9") != std::string::npos);
}
