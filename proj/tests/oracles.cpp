#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oracle {

namespace {

constexpr double kEps = 1e-9;

double row_norm(const Mat& m, std::size_t r) {
  double acc = 0.0;
  for (std::size_t c = 0; c < m.cols; ++c) acc += m.at(r, c) * m.at(r, c);
  return std::sqrt(acc + kEps * kEps);
}

double row_sim(const Mat& a, std::size_t i, const Mat& b, std::size_t j) {
  double dot = 0.0;
  for (std::size_t c = 0; c < a.cols; ++c) dot += a.at(i, c) * b.at(j, c);
  return dot / (row_norm(a, i) * row_norm(b, j));
}

double col_norm(const Mat& m, std::size_t c) {
  double acc = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) acc += m.at(r, c) * m.at(r, c);
  return std::sqrt(acc + kEps * kEps);
}

double col_sim(const Mat& a, std::size_t i, const Mat& b, std::size_t j) {
  double dot = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) dot += a.at(r, i) * b.at(r, j);
  return dot / (col_norm(a, i) * col_norm(b, j));
}

double xlogx(double p) { return p * std::log(p > 1e-12 ? p : 1e-12); }

}  // namespace

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na + kEps * kEps) * std::sqrt(nb + kEps * kEps));
}

double icl(const Mat& fused, const std::vector<Mat>& views, double tau) {
  const std::size_t n = fused.rows;
  double loss = 0.0;
  for (const Mat& h : views) {
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) denom += std::exp(row_sim(fused, i, fused, j) / tau);
        denom += std::exp(row_sim(fused, i, h, j) / tau);
      }
      const double pos = row_sim(fused, i, h, i) / tau;
      loss += std::log(denom) - pos;
    }
  }
  return loss;
}

double ccl(const Mat& fused_assign, const std::vector<Mat>& view_assigns,
           double tau) {
  const std::size_t k = fused_assign.cols;
  double loss = 0.0;
  for (const Mat& a : view_assigns) {
    for (std::size_t i = 0; i < k; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        denom += std::exp(col_sim(fused_assign, i, a, j) / tau);
      }
      loss += std::log(denom) - col_sim(fused_assign, i, a, i) / tau;
    }
  }
  return loss;
}

double entropy_per_sample(const Mat& a, const Mat& b) {
  double acc = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c) {
      acc += xlogx(a.at(r, c)) + xlogx(b.at(r, c));
    }
  }
  return -acc / (static_cast<double>(a.cols) * static_cast<double>(a.rows));
}

double entropy_marginal(const Mat& a, const Mat& b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.cols; ++c) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r) {
      ma += a.at(r, c);
      mb += b.at(r, c);
    }
    acc += xlogx(ma / static_cast<double>(a.rows)) +
           xlogx(mb / static_cast<double>(b.rows));
  }
  return -acc / static_cast<double>(a.cols);
}

Mat kernel(const Mat& hidden, double sigma) {
  const std::size_t n = hidden.rows;
  Mat q(n, n);
  const double denom = (2.0 * sigma) * (2.0 * sigma);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < hidden.cols; ++c) {
        const double diff = hidden.at(i, c) - hidden.at(j, c);
        d2 += diff * diff;
      }
      q.at(i, j) = std::exp(-d2 / denom);
    }
  }
  return q;
}

namespace {

// (1/k) * sum_{i<j} m_i' Q m_j / sqrt(m_i' Q m_i * m_j' Q m_j) over columns.
double cs_divergence(const Mat& m, const Mat& q) {
  const std::size_t n = m.rows, k = m.cols;
  Mat s(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          acc += m.at(r, i) * q.at(r, c) * m.at(c, j);
        }
      }
      s.at(i, j) = acc;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      total += s.at(i, j) / std::sqrt(s.at(i, i) * s.at(j, j) + kEps);
    }
  }
  return total / static_cast<double>(k);
}

}  // namespace

DdcParts ddc(const Mat& assign, const Mat& kernel) {
  const std::size_t n = assign.rows, k = assign.cols;
  DdcParts parts;
  parts.t1 = cs_divergence(assign, kernel);

  double upper = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += assign.at(i, c) * assign.at(j, c);
      upper += dot;
    }
  }
  parts.t2 = upper / (static_cast<double>(n) * (n - 1) / 2.0);

  Mat corner(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double diff = assign.at(i, c) - (c == j ? 1.0 : 0.0);
        d2 += diff * diff;
      }
      corner.at(i, j) = std::exp(-d2);
    }
  }
  parts.t3 = cs_divergence(corner, kernel);
  return parts;
}

double contrast(const Mat& fused, const std::vector<Mat>& views,
                const Mat& fused_assign, const std::vector<Mat>& view_assigns,
                double tau, bool marginal_entropy) {
  double entropy = 0.0;
  for (const Mat& a : view_assigns) {
    entropy += marginal_entropy ? entropy_marginal(fused_assign, a)
                                : entropy_per_sample(fused_assign, a);
  }
  return (icl(fused, views, tau) + ccl(fused_assign, view_assigns, tau) -
          entropy) /
         static_cast<double>(views.size());
}

double brute_force_acc(const std::vector<int>& truth,
                       const std::vector<int>& predicted) {
  int k = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    k = std::max({k, truth[i] + 1, predicted[i] + 1});
  }
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t matched = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (perm[predicted[i]] == truth[i]) ++matched;
    }
    best = std::max(best, matched);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

double pair_count_ari(const std::vector<int>& truth,
                      const std::vector<int>& predicted) {
  double same_both = 0.0, same_truth = 0.0, same_pred = 0.0, diff_both = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = i + 1; j < truth.size(); ++j) {
      const bool ty = truth[i] == truth[j];
      const bool tc = predicted[i] == predicted[j];
      if (ty && tc) same_both += 1.0;
      else if (ty) same_truth += 1.0;
      else if (tc) same_pred += 1.0;
      else diff_both += 1.0;
    }
  }
  const double total = same_both + same_truth + same_pred + diff_both;
  if (total == 0.0) return truth == predicted ? 1.0 : 0.0;
  const double expected =
      (same_both + same_truth) * (same_both + same_pred) / total;
  const double max_index = (2.0 * same_both + same_truth + same_pred) / 2.0;
  if (max_index == expected) return same_both == expected ? 1.0 : 0.0;
  return (same_both - expected) / (max_index - expected);
}

double plogp_nmi(const std::vector<int>& truth,
                 const std::vector<int>& predicted) {
  std::size_t ky = 0, kc = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ky = std::max(ky, static_cast<std::size_t>(truth[i]) + 1);
    kc = std::max(kc, static_cast<std::size_t>(predicted[i]) + 1);
  }
  Mat q(ky, kc);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    q.at(truth[i], predicted[i]) += 1.0;
  }
  const double n = static_cast<double>(truth.size());
  double hy = 0.0, hc = 0.0, mi = 0.0;
  for (std::size_t y = 0; y < ky; ++y) {
    double a = 0.0;
    for (std::size_t c = 0; c < kc; ++c) a += q.at(y, c);
    if (a > 0) hy -= (a / n) * std::log(a / n);
  }
  for (std::size_t c = 0; c < kc; ++c) {
    double b = 0.0;
    for (std::size_t y = 0; y < ky; ++y) b += q.at(y, c);
    if (b > 0) hc -= (b / n) * std::log(b / n);
  }
  if (hy == 0.0 && hc == 0.0) return 1.0;
  for (std::size_t y = 0; y < ky; ++y) {
    double a = 0.0;
    for (std::size_t c = 0; c < kc; ++c) a += q.at(y, c);
    for (std::size_t c = 0; c < kc; ++c) {
      double b = 0.0;
      for (std::size_t yy = 0; yy < ky; ++yy) b += q.at(yy, c);
      if (q.at(y, c) > 0) {
        mi += (q.at(y, c) / n) * std::log(q.at(y, c) * n / (a * b));
      }
    }
  }
  return mi / (0.5 * (hy + hc));
}

}  // namespace oracle
