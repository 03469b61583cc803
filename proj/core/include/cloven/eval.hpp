#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cloven/data.hpp"
#include "cloven/model.hpp"

namespace cloven {

struct KMeansResult {
  std::vector<int> labels;
  Tensor centroids;  // k x d
  double inertia = 0.0;
};

// k-means++ seeding plus Lloyd iterations to an assignment fixpoint (or
// max_iter); the best inertia over the requested restarts wins.
KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 100, std::size_t restarts = 10);

// Clustering accuracy under the best one-to-one cluster-to-label assignment
// (Hungarian algorithm; rectangular cases are padded).
double hungarian_acc(const std::vector<int>& truth,
                     const std::vector<int>& predicted);

// Normalized mutual information with arithmetic-mean normalization.
// Two constant partitions score 1; one constant partition scores 0.
double nmi(const std::vector<int>& truth, const std::vector<int>& predicted);

// Adjusted Rand index; a degenerate denominator scores 1 for equal
// partitions and 0 otherwise.
double ari(const std::vector<int>& truth, const std::vector<int>& predicted);

struct ProbeConfig {
  std::size_t epochs = 300;
  double lr = 0.05;
  double margin = 1.0;
  std::uint64_t seed = 0;
};

struct ProbeMetrics {
  double acc = 0.0;
  double precision = 0.0;  // macro average
  double fscore = 0.0;     // macro average
  std::vector<double> per_class_precision;
  std::vector<double> per_class_recall;
  std::vector<double> per_class_fscore;
  std::vector<std::string> warnings;
};

// Linear multiclass hinge-loss classifier trained on the autodiff engine;
// macro-averaged precision and F-score. Classes absent from the training
// split are skipped from the macro averages with a warning; a class with no
// predicted positives contributes precision 0.
ProbeMetrics linear_probe(const Tensor& z_train,
                          const std::vector<int>& y_train,
                          const Tensor& z_test, const std::vector<int>& y_test,
                          const ProbeConfig& cfg = {});

struct ClusterMetrics {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

struct MetricsReport {
  ClusterMetrics kmeans_on_fused;  // k-means over Z
  ClusterMetrics head_argmax;      // argmax of the clustering head
  std::optional<ProbeMetrics> classification;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  std::size_t parameter_count = 0;
};

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_to_table(const MetricsReport& report);

// Eval-mode embeddings of the full dataset.
struct Embeddings {
  Tensor fused;                   // Z
  std::vector<Tensor> view_repr;  // H_v
  Tensor fused_assign;            // g(Z)
};
Embeddings extract_embeddings(CloVenModel& model, const MultiViewDataset& data);

struct EvalOptions {
  std::uint64_t seed = 0;
  std::size_t kmeans_restarts = 10;
  bool classification = false;  // also run the 8:2 linear probe
  double train_fraction = 0.8;
};

// Clustering metrics on the fused representation: k-means with k equal to
// the ground-truth class count, plus the clustering head's own partition.
MetricsReport evaluate_clustering(CloVenModel& model,
                                  const MultiViewDataset& data,
                                  const EvalOptions& opts = {});

}  // namespace cloven
