#include "cloven/losses.hpp"

#include <algorithm>
#include <cmath>

namespace cloven {

namespace {

constexpr double kEps = 1e-9;

// Constant mask with ones strictly above the diagonal.
Tensor strict_upper_mask(std::size_t n) {
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = 1.0;
  }
  return Tensor(n, n, std::move(m));
}

// One SimCLR-style term: anchors are the rows of `anchor`, positives the
// matching rows of `other`; the denominator pools the remaining anchor rows
// and every row of `other`.
Tensor nt_xent(const Tensor& anchor, const Tensor& other, double tau,
               SimilarityAudit* audit, int anchor_src, int other_src) {
  const Tensor an = normalize_rows(anchor);
  const Tensor on = normalize_rows(other);
  if (audit) {
    audit->note(anchor_src, anchor_src);
    audit->note(anchor_src, other_src);
  }
  const Tensor sim_aa = matmul(an, transpose(an));
  const Tensor sim_ao = matmul(an, transpose(on));
  const Tensor pos = row_sum(an * on);       // n x 1
  const Tensor self_sim = row_sum(an * an);  // n x 1, ~1 up to the norm guard
  const Tensor denom = row_sum(exp(sim_aa / tau)) - exp(self_sim / tau) +
                       row_sum(exp(sim_ao / tau));
  return sum(log(denom) - pos / tau);
}

// Category-level term: anchors are the columns of `anchor_assign`, positives
// and negatives the columns of `other_assign`.
Tensor column_contrast(const Tensor& anchor_assign, const Tensor& other_assign,
                       double tau, SimilarityAudit* audit, int anchor_src,
                       int other_src) {
  const Tensor ac = normalize_rows(transpose(anchor_assign));  // k x n
  const Tensor oc = normalize_rows(transpose(other_assign));
  if (audit) audit->note(anchor_src, other_src);
  const Tensor sims = matmul(ac, transpose(oc));  // k x k
  const Tensor pos = row_sum(ac * oc);            // k x 1
  const Tensor denom = row_sum(exp(sims / tau));  // positive included
  return sum(log(denom) - pos / tau);
}

}  // namespace

void LossConfig::validate() const {
  if (tau <= 0.0) detail::fail_contract("loss config: tau must be positive");
  if (sigma <= 0.0) detail::fail_contract("loss config: sigma must be positive");
  if (!use_icl && !use_ccl && !use_ddc) {
    detail::fail_contract("loss config: at least one loss term must be enabled");
  }
}

Tensor normalize_rows(const Tensor& x) {
  const Tensor norm = sqrt(row_sum(x * x) + kEps * kEps);
  return x / norm;
}

Tensor cosine_sim(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size() || (a.rows() != 1 && a.cols() != 1) ||
      (b.rows() != 1 && b.cols() != 1)) {
    detail::fail_contract("cosine_sim: expects two vectors of equal length");
  }
  const Tensor ar = a.rows() == 1 ? a : transpose(a);
  const Tensor br = b.rows() == 1 ? b : transpose(b);
  return row_sum(normalize_rows(ar) * normalize_rows(br));
}

Tensor instance_contrastive(const Tensor& fused_proj,
                            const std::vector<Tensor>& view_proj, double tau,
                            SimilarityAudit* audit) {
  if (fused_proj.rows() < 2) {
    detail::fail_contract(
        "instance_contrastive: need at least 2 samples for negatives");
  }
  for (const Tensor& h : view_proj) {
    if (h.rows() != fused_proj.rows() || h.cols() != fused_proj.cols()) {
      detail::fail_contract(
          "instance_contrastive: projected shapes must all agree");
    }
  }
  Tensor loss = Tensor::scalar(0.0);
  for (std::size_t v = 0; v < view_proj.size(); ++v) {
    loss = loss + nt_xent(fused_proj, view_proj[v], tau, audit,
                          SimilarityAudit::kFused, static_cast<int>(v));
  }
  return loss;
}

Tensor category_contrastive(const Tensor& fused_assign,
                            const std::vector<Tensor>& view_assign, double tau,
                            SimilarityAudit* audit) {
  if (fused_assign.cols() < 2) {
    detail::fail_contract("category_contrastive: need at least 2 clusters");
  }
  Tensor loss = Tensor::scalar(0.0);
  for (std::size_t v = 0; v < view_assign.size(); ++v) {
    loss = loss + column_contrast(fused_assign, view_assign[v], tau, audit,
                                  SimilarityAudit::kFused, static_cast<int>(v));
  }
  return loss;
}

Tensor assignment_entropy(const Tensor& assign_a, const Tensor& assign_b,
                          EntropyMode mode) {
  const double k = static_cast<double>(assign_a.cols());
  if (mode == EntropyMode::kPerSample) {
    const double n = static_cast<double>(assign_a.rows());
    return -(sum(xlogx(assign_a)) + sum(xlogx(assign_b))) / (k * n);
  }
  const Tensor ma = col_mean(assign_a);
  const Tensor mb = col_mean(assign_b);
  return -(sum(xlogx(ma)) + sum(xlogx(mb))) / k;
}

Tensor kernel_matrix(const Tensor& hidden, double sigma, bool sigma_relative) {
  if (hidden.rows() < 2) {
    detail::fail_contract("kernel_matrix: need at least 2 samples");
  }
  const Tensor sq_norm = row_sum(hidden * hidden);  // n x 1
  const Tensor cross = matmul(hidden, transpose(hidden));
  // Clamp the tiny negatives floating-point cancellation can leave behind.
  const Tensor sq_dist = relu(sq_norm + transpose(sq_norm) - 2.0 * cross);

  double bandwidth = sigma;
  if (sigma_relative) {
    // Median pairwise distance, used as a constant scale.
    const std::size_t n = hidden.rows();
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    const auto& sq = sq_dist.values();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        dists.push_back(std::sqrt(sq[i * n + j]));
      }
    }
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                     dists.end());
    bandwidth = sigma * std::max(dists[dists.size() / 2], kEps);
  }
  const double denom = (2.0 * bandwidth) * (2.0 * bandwidth);
  return exp(sq_dist * (-1.0 / denom));
}

DdcTerms ddc_loss_with_kernel(const Tensor& assign, const Tensor& kernel) {
  const std::size_t n = assign.rows();
  const std::size_t k = assign.cols();
  if (kernel.rows() != n || kernel.cols() != n) {
    detail::fail_contract("ddc: kernel must be n x n for n assignment rows");
  }
  if (n < k) {
    detail::fail_contract("ddc: need at least as many samples as clusters");
  }
  const Tensor upper_k = strict_upper_mask(k);
  const double kd = static_cast<double>(k);

  auto cs_divergence = [&](const Tensor& m) {
    const Tensor s = matmul(transpose(m), matmul(kernel, m));  // k x k
    const Tensor d = diagonal(s);                              // k x 1
    const Tensor denom = sqrt(matmul(d, transpose(d)) + kEps);
    return sum((s / denom) * upper_k) / kd;
  };

  DdcTerms out;
  out.term1 = cs_divergence(assign);

  const Tensor gram = matmul(assign, transpose(assign));  // n x n
  const double pairs = static_cast<double>(n) * (n - 1) / 2.0;
  out.term2 = sum(gram * strict_upper_mask(n)) / pairs;

  // Closeness to the simplex corners: m_ij = exp(-|a_i - e_j|^2), expanded
  // through |a_i - e_j|^2 = |a_i|^2 + 1 - 2 a_ij.
  const Tensor row_sq = row_sum(assign * assign);  // n x 1
  const Tensor corner = exp(2.0 * assign - row_sq - 1.0);
  out.term3 = cs_divergence(corner);

  out.total = out.term1 + out.term2 + out.term3;
  return out;
}

DdcTerms ddc_loss(const Tensor& assign, const Tensor& hidden,
                  const LossConfig& cfg) {
  return ddc_loss_with_kernel(
      assign, kernel_matrix(hidden, cfg.sigma, cfg.sigma_relative));
}

ContrastLoss contrast_loss(const Tensor& fused_proj,
                           const std::vector<Tensor>& view_proj,
                           const Tensor& fused_assign,
                           const std::vector<Tensor>& view_assign,
                           const LossConfig& cfg, SimilarityAudit* audit) {
  const std::size_t views = view_proj.size();
  ContrastLoss out;
  Tensor icl = Tensor::scalar(0.0);
  Tensor ccl = Tensor::scalar(0.0);
  Tensor entropy = Tensor::scalar(0.0);
  double divisor = static_cast<double>(views);

  if (cfg.asymmetric) {
    if (cfg.use_icl) {
      icl = instance_contrastive(fused_proj, view_proj, cfg.tau, audit);
    }
    if (cfg.use_ccl) {
      ccl = category_contrastive(fused_assign, view_assign, cfg.tau, audit);
    }
    if (cfg.use_icl || cfg.use_ccl) {
      for (std::size_t v = 0; v < views; ++v) {
        entropy = entropy + assignment_entropy(fused_assign, view_assign[v],
                                               cfg.entropy_mode);
      }
    }
  } else {
    // Ablation: align view pairs directly, every ordered pair once.
    divisor = static_cast<double>(views * (views - 1));
    for (std::size_t v = 0; v < views; ++v) {
      for (std::size_t w = 0; w < views; ++w) {
        if (v == w) continue;
        if (cfg.use_icl) {
          icl = icl + nt_xent(view_proj[v], view_proj[w], cfg.tau, audit,
                              static_cast<int>(v), static_cast<int>(w));
        }
        if (cfg.use_ccl) {
          ccl = ccl + column_contrast(view_assign[v], view_assign[w], cfg.tau,
                                      audit, static_cast<int>(v),
                                      static_cast<int>(w));
        }
        if (cfg.use_icl || cfg.use_ccl) {
          entropy = entropy + assignment_entropy(view_assign[v],
                                                 view_assign[w],
                                                 cfg.entropy_mode);
        }
      }
    }
  }

  out.value = (icl + ccl - entropy) / divisor;
  out.icl = icl.item();
  out.ccl = ccl.item();
  out.entropy = entropy.item();
  return out;
}

TotalLoss total_loss(const ForwardProducts& fwd, const LossConfig& cfg,
                     SimilarityAudit* audit) {
  cfg.validate();
  TotalLoss out;
  Tensor total = Tensor::scalar(0.0);

  if (cfg.use_icl || cfg.use_ccl) {
    ContrastLoss contrast =
        contrast_loss(fwd.fused_proj, fwd.view_proj, fwd.fused_assign,
                      fwd.view_assign, cfg, audit);
    out.parts.icl = contrast.icl;
    out.parts.ccl = contrast.ccl;
    out.parts.entropy = contrast.entropy;
    out.parts.contrast = contrast.value.item();
    total = total + contrast.value;
  }

  if (cfg.use_ddc) {
    if (audit) audit->note(SimilarityAudit::kFused, SimilarityAudit::kFused);
    DdcTerms ddc = ddc_loss(fwd.fused_assign, fwd.fused_hidden, cfg);
    out.parts.ddc_term1 = ddc.term1.item();
    out.parts.ddc_term2 = ddc.term2.item();
    out.parts.ddc_term3 = ddc.term3.item();
    out.parts.ddc = ddc.total.item();
    total = total + ddc.total;
  }

  out.value = total;
  out.parts.total = total.item();
  return out;
}

}  // namespace cloven
