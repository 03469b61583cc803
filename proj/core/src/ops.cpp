#include <cmath>
#include <stdexcept>
#include <string>

#include "cloven/tensor.hpp"

namespace cloven {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

#ifndef NDEBUG
void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string("non-finite value produced by ") +
                               op);
    }
  }
}
#define CLOVEN_CHECK_FINITE(op, vec) check_finite(op, vec)
#else
#define CLOVEN_CHECK_FINITE(op, vec) ((void)0)
#endif

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

Tensor make_result(std::size_t rows, std::size_t cols,
                   std::vector<double> data) {
  return Tensor(rows, cols, std::move(data));
}

// Records the op when a tape is active and some input carries gradients.
void maybe_record(const char* op, std::initializer_list<Tensor> inputs,
                  Tensor& out, std::function<void()> backward) {
  Graph* g = Graph::active();
  if (!g) return;
  bool needs = false;
  for (const Tensor& t : inputs) needs = needs || t.needs_grad();
  if (!needs) return;
  out.impl()->needs_grad = true;
  std::vector<Impl> impls;
  impls.reserve(inputs.size());
  for (const Tensor& t : inputs) impls.push_back(t.impl());
  g->record(op, std::move(impls), out.impl(), std::move(backward));
}

// Broadcast strides: extent-1 dimensions repeat.
struct Bcast {
  std::size_t rs, cs;
};
Bcast strides_for(const Tensor& t) {
  return {t.rows() == 1 ? 0 : t.cols(), t.cols() == 1 ? 0u : 1u};
}

void require_broadcastable(const char* op, const Tensor& a, const Tensor& b) {
  const bool rows_ok = a.rows() == b.rows() || a.rows() == 1 || b.rows() == 1;
  const bool cols_ok = a.cols() == b.cols() || a.cols() == 1 || b.cols() == 1;
  if (!rows_ok || !cols_ok) {
    detail::fail_contract(std::string(op) + ": shapes " + shape_str(a) +
                          " and " + shape_str(b) + " are not broadcastable");
  }
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

Tensor binary_op(const char* name, BinOp kind, const Tensor& a,
                 const Tensor& b) {
  require_broadcastable(name, a, b);
  const std::size_t rows = std::max(a.rows(), b.rows());
  const std::size_t cols = std::max(a.cols(), b.cols());
  const Bcast sa = strides_for(a);
  const Bcast sb = strides_for(b);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = av[r * sa.rs + c * sa.cs];
      const double y = bv[r * sb.rs + c * sb.cs];
      double v = 0.0;
      switch (kind) {
        case BinOp::kAdd: v = x + y; break;
        case BinOp::kSub: v = x - y; break;
        case BinOp::kMul: v = x * y; break;
        case BinOp::kDiv:
          if (y == 0.0) {
            throw std::domain_error(std::string(name) + ": division by zero");
          }
          v = x / y;
          break;
      }
      out[r * cols + c] = v;
    }
  }
  Tensor result = make_result(rows, cols, std::move(out));
  CLOVEN_CHECK_FINITE(name, result.values());

  auto ai = a.impl(), bi = b.impl(), oi = result.impl();
  maybe_record(name, {a, b}, result, [kind, ai, bi, oi, sa, sb]() {
    const auto& go = oi->grad;
    const std::size_t rows = oi->rows, cols = oi->cols;
    const bool need_a = ai->needs_grad, need_b = bi->needs_grad;
    if (need_a) detail::ensure_grad(*ai);
    if (need_b) detail::ensure_grad(*bi);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double g = go[r * cols + c];
        const std::size_t ia = r * sa.rs + c * sa.cs;
        const std::size_t ib = r * sb.rs + c * sb.cs;
        switch (kind) {
          case BinOp::kAdd:
            if (need_a) ai->grad[ia] += g;
            if (need_b) bi->grad[ib] += g;
            break;
          case BinOp::kSub:
            if (need_a) ai->grad[ia] += g;
            if (need_b) bi->grad[ib] -= g;
            break;
          case BinOp::kMul:
            if (need_a) ai->grad[ia] += g * bi->data[ib];
            if (need_b) bi->grad[ib] += g * ai->data[ia];
            break;
          case BinOp::kDiv: {
            const double y = bi->data[ib];
            if (need_a) ai->grad[ia] += g / y;
            if (need_b) bi->grad[ib] -= g * ai->data[ia] / (y * y);
            break;
          }
        }
      }
    }
  });
  return result;
}

Tensor unary_op(const char* name, const Tensor& a,
                const std::function<double(double)>& f,
                const std::function<double(double x, double y)>& dfdx) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  Tensor result = make_result(a.rows(), a.cols(), std::move(out));
  CLOVEN_CHECK_FINITE(name, result.values());
  auto ai = a.impl(), oi = result.impl();
  maybe_record(name, {a}, result, [ai, oi, dfdx]() {
    detail::ensure_grad(*ai);
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      ai->grad[i] += oi->grad[i] * dfdx(ai->data[i], oi->data[i]);
    }
  });
  return result;
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  return binary_op("add", BinOp::kAdd, a, b);
}
Tensor operator-(const Tensor& a, const Tensor& b) {
  return binary_op("sub", BinOp::kSub, a, b);
}
Tensor operator*(const Tensor& a, const Tensor& b) {
  return binary_op("mul", BinOp::kMul, a, b);
}
Tensor operator/(const Tensor& a, const Tensor& b) {
  return binary_op("div", BinOp::kDiv, a, b);
}

Tensor operator-(const Tensor& a) {
  return unary_op("neg", a, [](double x) { return -x; },
                  [](double, double) { return -1.0; });
}

Tensor operator+(const Tensor& a, double c) { return a + Tensor::scalar(c); }
Tensor operator+(double c, const Tensor& a) { return Tensor::scalar(c) + a; }
Tensor operator-(const Tensor& a, double c) { return a - Tensor::scalar(c); }
Tensor operator-(double c, const Tensor& a) { return Tensor::scalar(c) - a; }
Tensor operator*(const Tensor& a, double c) { return a * Tensor::scalar(c); }
Tensor operator*(double c, const Tensor& a) { return Tensor::scalar(c) * a; }
Tensor operator/(const Tensor& a, double c) { return a / Tensor::scalar(c); }

Tensor exp(const Tensor& a) {
  return unary_op("exp", a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values()) {
    if (x <= 0.0) {
      throw std::domain_error("log: input must be strictly positive");
    }
  }
  return unary_op("log", a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.values()) {
    if (x < 0.0) {
      throw std::domain_error("sqrt: input must be nonnegative");
    }
  }
  return unary_op("sqrt", a, [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor relu(const Tensor& a) {
  // NaN propagates instead of flushing to zero, so poisoned values surface.
  return unary_op("relu", a,
                  [](double x) { return x > 0.0 || x != x ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor xlogx(const Tensor& a) {
  static constexpr double kFloor = 1e-12;
  return unary_op(
      "xlogx", a,
      [](double x) { return x * std::log(x > kFloor ? x : kFloor); },
      [](double x, double) {
        return x > kFloor ? std::log(x) + 1.0 : std::log(kFloor);
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    detail::fail_contract("matmul: inner dimensions disagree: " +
                          shape_str(a) + " * " + shape_str(b));
  }
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(n * p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = av[i * m + k];
      if (aik == 0.0) continue;
      const double* brow = &bv[k * p];
      double* orow = &out[i * p];
      for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  }
  Tensor result = make_result(n, p, std::move(out));
  CLOVEN_CHECK_FINITE("matmul", result.values());
  auto ai = a.impl(), bi = b.impl(), oi = result.impl();
  maybe_record("matmul", {a, b}, result, [ai, bi, oi, n, m, p]() {
    const auto& go = oi->grad;
    if (ai->needs_grad) {  // dA = dC * B^T
      detail::ensure_grad(*ai);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
          double acc = 0.0;
          const double* grow = &go[i * p];
          const double* brow = &bi->data[k * p];
          for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
          ai->grad[i * m + k] += acc;
        }
      }
    }
    if (bi->needs_grad) {  // dB = A^T * dC
      detail::ensure_grad(*bi);
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = &go[i * p];
        for (std::size_t k = 0; k < m; ++k) {
          const double aik = ai->data[i * m + k];
          if (aik == 0.0) continue;
          double* brow = &bi->grad[k * p];
          for (std::size_t j = 0; j < p; ++j) brow[j] += aik * grow[j];
        }
      }
    }
  });
  return result;
}

Tensor transpose(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  const auto& av = a.values();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = av[i * m + j];
  }
  Tensor result = make_result(m, n, std::move(out));
  auto ai = a.impl(), oi = result.impl();
  maybe_record("transpose", {a}, result, [ai, oi, n, m]() {
    detail::ensure_grad(*ai);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        ai->grad[i * m + j] += oi->grad[j * n + i];
      }
    }
  });
  return result;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  Tensor result = make_result(1, 1, {acc});
  auto ai = a.impl(), oi = result.impl();
  maybe_record("sum", {a}, result, [ai, oi]() {
    detail::ensure_grad(*ai);
    const double g = oi->grad[0];
    for (double& v : ai->grad) v += g;
  });
  return result;
}

Tensor mean(const Tensor& a) { return sum(a) / static_cast<double>(a.size()); }

Tensor row_sum(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  const auto& av = a.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i] += av[i * m + j];
  }
  Tensor result = make_result(n, 1, std::move(out));
  auto ai = a.impl(), oi = result.impl();
  maybe_record("row_sum", {a}, result, [ai, oi, n, m]() {
    detail::ensure_grad(*ai);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = oi->grad[i];
      for (std::size_t j = 0; j < m; ++j) ai->grad[i * m + j] += g;
    }
  });
  return result;
}

Tensor col_sum(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  const auto& av = a.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j] += av[i * m + j];
  }
  Tensor result = make_result(1, m, std::move(out));
  auto ai = a.impl(), oi = result.impl();
  maybe_record("col_sum", {a}, result, [ai, oi, n, m]() {
    detail::ensure_grad(*ai);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) ai->grad[i * m + j] += oi->grad[j];
    }
  });
  return result;
}

Tensor col_mean(const Tensor& a) {
  return col_sum(a) / static_cast<double>(a.rows());
}

Tensor diagonal(const Tensor& a) {
  if (a.rows() != a.cols()) {
    detail::fail_contract("diagonal: matrix must be square, got " +
                          shape_str(a));
  }
  const std::size_t n = a.rows();
  const auto& av = a.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i * n + i];
  Tensor result = make_result(n, 1, std::move(out));
  auto ai = a.impl(), oi = result.impl();
  maybe_record("diagonal", {a}, result, [ai, oi, n]() {
    detail::ensure_grad(*ai);
    for (std::size_t i = 0; i < n; ++i) ai->grad[i * n + i] += oi->grad[i];
  });
  return result;
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t n = a.rows(), k = a.cols();
  const auto& av = a.values();
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &av[i * k];
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = std::exp(row[j] - mx);
      denom += out[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= denom;
  }
  Tensor result = make_result(n, k, std::move(out));
  CLOVEN_CHECK_FINITE("softmax", result.values());
  auto ai = a.impl(), oi = result.impl();
  maybe_record("softmax", {a}, result, [ai, oi, n, k]() {
    detail::ensure_grad(*ai);
    for (std::size_t i = 0; i < n; ++i) {
      const double* y = &oi->data[i * k];
      const double* g = &oi->grad[i * k];
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < k; ++j) {
        ai->grad[i * k + j] += y[j] * (g[j] - dot);
      }
    }
  });
  return result;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    detail::fail_contract("concat_cols: need at least one input");
  }
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    if (t.rows() != n) {
      detail::fail_contract("concat_cols: row counts disagree (" +
                            std::to_string(t.rows()) + " vs " +
                            std::to_string(n) + ")");
    }
    total += t.cols();
  }
  std::vector<double> out(n * total);
  std::size_t off = 0;
  for (const Tensor& t : parts) {
    const std::size_t m = t.cols();
    const auto& tv = t.values();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        out[i * total + off + j] = tv[i * m + j];
      }
    }
    off += m;
  }
  Tensor result = make_result(n, total, std::move(out));

  Graph* g = Graph::active();
  bool needs = false;
  for (const Tensor& t : parts) needs = needs || t.needs_grad();
  if (g && needs) {
    result.impl()->needs_grad = true;
    std::vector<Impl> impls;
    for (const Tensor& t : parts) impls.push_back(t.impl());
    auto oi = result.impl();
    g->record("concat_cols", impls, oi, [impls, oi, n, total]() {
      std::size_t off = 0;
      for (const auto& pi : impls) {
        const std::size_t m = pi->cols;
        if (pi->needs_grad) {
          detail::ensure_grad(*pi);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              pi->grad[i * m + j] += oi->grad[i * total + off + j];
            }
          }
        }
        off += m;
      }
    });
  }
  return result;
}

Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    detail::fail_contract("dropout: probability must lie in [0, 1), got " +
                          std::to_string(p));
  }
  if (mode == Mode::kEval || p == 0.0) return x;
  const double scale = 1.0 / (1.0 - p);
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double keep = rng.uniform() >= p ? scale : 0.0;
    (*mask)[i] = keep;
    out[i] = xv[i] * keep;
  }
  Tensor result = make_result(x.rows(), x.cols(), std::move(out));
  auto xi = x.impl(), oi = result.impl();
  maybe_record("dropout", {x}, result, [xi, oi, mask]() {
    detail::ensure_grad(*xi);
    for (std::size_t i = 0; i < oi->grad.size(); ++i) {
      xi->grad[i] += oi->grad[i] * (*mask)[i];
    }
  });
  return result;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean,
                 std::vector<double>& running_var, Mode mode, double momentum,
                 double eps) {
  const std::size_t n = x.rows(), d = x.cols();
  if (gamma.size() != d || beta.size() != d || running_mean.size() != d ||
      running_var.size() != d) {
    detail::fail_contract("batchnorm: parameter/state widths disagree with input");
  }
  if (mode == Mode::kTrain && n < 2) {
    detail::fail_contract("batchnorm: train mode needs a batch of at least 2 rows");
  }
  const auto& xv = x.values();
  auto xhat = std::make_shared<std::vector<double>>(n * d);
  auto inv_std = std::make_shared<std::vector<double>>(d);

  if (mode == Mode::kTrain) {
    for (std::size_t j = 0; j < d; ++j) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += xv[i * d + j];
      mu /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dv = xv[i * d + j] - mu;
        var += dv * dv;
      }
      var /= static_cast<double>(n);  // biased, for normalization
      const double s = 1.0 / std::sqrt(var + eps);
      (*inv_std)[j] = s;
      for (std::size_t i = 0; i < n; ++i) {
        (*xhat)[i * d + j] = (xv[i * d + j] - mu) * s;
      }
      const double unbiased = var * static_cast<double>(n) /
                              static_cast<double>(n - 1);
      running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mu;
      running_var[j] = (1.0 - momentum) * running_var[j] + momentum * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      const double s = 1.0 / std::sqrt(running_var[j] + eps);
      (*inv_std)[j] = s;
      for (std::size_t i = 0; i < n; ++i) {
        (*xhat)[i * d + j] = (xv[i * d + j] - running_mean[j]) * s;
      }
    }
  }

  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[i * d + j] = gv[j] * (*xhat)[i * d + j] + bv[j];
    }
  }
  Tensor result = make_result(n, d, std::move(out));
  CLOVEN_CHECK_FINITE("batchnorm", result.values());

  auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = result.impl();
  const bool train = mode == Mode::kTrain;
  maybe_record("batchnorm", {x, gamma, beta}, result,
               [xi, gi, bi, oi, xhat, inv_std, n, d, train]() {
    const auto& go = oi->grad;
    if (gi->needs_grad) {
      detail::ensure_grad(*gi);
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += go[i * d + j] * (*xhat)[i * d + j];
        }
        gi->grad[j] += acc;
      }
    }
    if (bi->needs_grad) {
      detail::ensure_grad(*bi);
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += go[i * d + j];
        bi->grad[j] += acc;
      }
    }
    if (!xi->needs_grad) return;
    detail::ensure_grad(*xi);
    for (std::size_t j = 0; j < d; ++j) {
      const double g_over_s = gi->data[j] * (*inv_std)[j];
      if (!train) {  // running statistics are constants
        for (std::size_t i = 0; i < n; ++i) {
          xi->grad[i * d + j] += go[i * d + j] * g_over_s;
        }
        continue;
      }
      double mean_dy = 0.0, mean_dy_xhat = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mean_dy += go[i * d + j];
        mean_dy_xhat += go[i * d + j] * (*xhat)[i * d + j];
      }
      mean_dy /= static_cast<double>(n);
      mean_dy_xhat /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double dxhat =
            go[i * d + j] - mean_dy - (*xhat)[i * d + j] * mean_dy_xhat;
        xi->grad[i * d + j] += dxhat * g_over_s;
      }
    }
  });
  return result;
}

}  // namespace cloven
