#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cloven/model.hpp"
#include "cloven/tensor.hpp"

namespace cloven {

enum class EntropyMode { kPerSample, kMarginal };

struct LossConfig {
  double tau = 0.5;    // contrastive temperature
  double sigma = 0.15; // Gaussian kernel bandwidth
  // When set, the bandwidth is sigma times the median pairwise distance of
  // the hidden features (treated as a constant scale, not differentiated).
  bool sigma_relative = false;
  EntropyMode entropy_mode = EntropyMode::kPerSample;
  bool use_icl = true;
  bool use_ccl = true;
  bool use_ddc = true;
  // The asymmetric strategy aligns every view only with the fused
  // representation. Disabling it (ablation) contrasts view pairs directly.
  bool asymmetric = true;

  void validate() const;
};

struct LossBreakdown {
  double icl = 0.0;
  double ccl = 0.0;
  double entropy = 0.0;  // sum over views of H(Z | H_v)
  double contrast = 0.0;
  double ddc_term1 = 0.0;
  double ddc_term2 = 0.0;
  double ddc_term3 = 0.0;
  double ddc = 0.0;
  double total = 0.0;
};

// Records which representation sources were compared by every similarity
// evaluation, so tests can assert that no two distinct view-specific
// representations are ever aligned directly.
class SimilarityAudit {
 public:
  static constexpr int kFused = -1;

  void note(int a, int b) { pairs_.emplace_back(a, b); }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
  void clear() { pairs_.clear(); }

  // True when no pair compares H_i with H_j for i != j.
  bool asymmetry_holds() const {
    for (const auto& [a, b] : pairs_) {
      if (a != kFused && b != kFused && a != b) return false;
    }
    return true;
  }

 private:
  std::vector<std::pair<int, int>> pairs_;
};

// Rows scaled to unit length; norms are guarded by sqrt(|row|^2 + eps^2)
// with eps = 1e-9 so zero rows stay finite.
Tensor normalize_rows(const Tensor& x);

// Cosine similarity of two vectors (1 x d or d x 1), as a 1x1 tensor.
Tensor cosine_sim(const Tensor& a, const Tensor& b);

// Instance-level contrastive loss: for each view, every fused-row anchor is
// pulled toward the matching view row; the denominator gathers the other
// fused rows and all rows of that view.
Tensor instance_contrastive(const Tensor& fused_proj,
                            const std::vector<Tensor>& view_proj, double tau,
                            SimilarityAudit* audit = nullptr);

// Category-level contrastive loss over cluster-assignment columns: the i-th
// column of the fused assignment is contrasted against the k columns of each
// view's assignment.
Tensor category_contrastive(const Tensor& fused_assign,
                            const std::vector<Tensor>& view_assign, double tau,
                            SimilarityAudit* audit = nullptr);

// Entropy of the two assignment matrices, -(1/k) sum_i [a_i log a_i +
// b_i log b_i], averaged over samples (per-sample mode) or applied to the
// batch marginals (marginal mode).
Tensor assignment_entropy(const Tensor& assign_a, const Tensor& assign_b,
                          EntropyMode mode);

// Gaussian kernel matrix Q_ij = exp(-|x_i - x_j|^2 / (2*sigma)^2).
Tensor kernel_matrix(const Tensor& hidden, double sigma, bool sigma_relative);

struct DdcTerms {
  Tensor term1;  // Cauchy-Schwarz divergence between assignment columns
  Tensor term2;  // mean of the strictly upper triangle of A A^T
  Tensor term3;  // same divergence with simplex-corner closeness in place of A
  Tensor total;
};

DdcTerms ddc_loss_with_kernel(const Tensor& assign, const Tensor& kernel);
DdcTerms ddc_loss(const Tensor& assign, const Tensor& hidden,
                  const LossConfig& cfg);

struct ContrastLoss {
  Tensor value;
  double icl = 0.0;
  double ccl = 0.0;
  double entropy = 0.0;
};

// (icl + ccl - sum_v entropy_v) / V, honoring the per-term toggles.
ContrastLoss contrast_loss(const Tensor& fused_proj,
                           const std::vector<Tensor>& view_proj,
                           const Tensor& fused_assign,
                           const std::vector<Tensor>& view_assign,
                           const LossConfig& cfg,
                           SimilarityAudit* audit = nullptr);

struct TotalLoss {
  Tensor value;
  LossBreakdown parts;
};

TotalLoss total_loss(const ForwardProducts& fwd, const LossConfig& cfg,
                     SimilarityAudit* audit = nullptr);

}  // namespace cloven
