#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cloven/rng.hpp"

namespace cloven {

enum class Mode { kTrain, kEval };

namespace detail {

struct TensorImpl {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass or zero_grad touches it
  bool requires_grad = false;  // leaf flag
  bool needs_grad = false;     // leaf flag, or depends on a leaf through the tape
  std::int64_t node = -1;      // index of the producing record in the active graph
};

[[noreturn]] void fail_contract(const std::string& what);
void ensure_grad(TensorImpl& t);

}  // namespace detail

// Dense row-major matrix of 64-bit floats. Scalars are 1x1, vectors are
// n x 1 or 1 x n. Copies share the underlying buffer (handle semantics);
// the differentiation tape records handles, so activations stay alive for
// the backward pass.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data,
         bool requires_grad = false);

  static Tensor zeros(std::size_t rows, std::size_t cols,
                      bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value,
                     bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor identity(std::size_t n);
  // Entries uniform in [-bound, bound].
  static Tensor rand_uniform(std::size_t rows, std::size_t cols, double bound,
                             Rng& rng, bool requires_grad = false);
  static Tensor rand_normal(std::size_t rows, std::size_t cols, double stddev,
                            Rng& rng, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  std::size_t rows() const { return impl_->rows; }
  std::size_t cols() const { return impl_->cols; }
  std::size_t size() const { return impl_->data.size(); }

  double at(std::size_t r, std::size_t c) const;
  double item() const;  // value of a 1x1 tensor

  const std::vector<double>& values() const { return impl_->data; }
  // In-place access for optimizers and state updates; only valid between
  // tapes (mutating a recorded activation invalidates its gradients).
  std::vector<double>& raw_values() { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  bool needs_grad() const { return impl_ && impl_->needs_grad; }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  const std::vector<double>& grad() const;
  std::vector<double>& raw_grad();
  void zero_grad();

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend class Graph;
  friend Tensor wrap_result(std::size_t, std::size_t, std::vector<double>&&);
};

// Reverse-mode tape. Constructing a Graph makes it the active tape for the
// current thread; ops record themselves while one is active and an input
// needs gradients. Records are append-only, and backward() replays them
// exactly once in reverse append order.
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  static Graph* active();

  // Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
  // the scalar loss. Repeated calls keep accumulating until grads are cleared.
  void backward(const Tensor& loss);

  std::size_t node_count() const { return records_.size(); }
  std::string dump() const;

  void record(const char* op,
              std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
              std::shared_ptr<detail::TensorImpl> output,
              std::function<void()> backward);

 private:
  struct Record {
    const char* op;
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    std::function<void()> backward;
  };
  std::vector<Record> records_;
  Graph* prev_ = nullptr;
};

// Elementwise ops broadcast over matching dimensions or extent-1 dimensions
// (row vectors, column vectors, scalars), numpy-style but limited to rank 2.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);

Tensor operator+(const Tensor& a, double c);
Tensor operator+(double c, const Tensor& a);
Tensor operator-(const Tensor& a, double c);
Tensor operator-(double c, const Tensor& a);
Tensor operator*(const Tensor& a, double c);
Tensor operator*(double c, const Tensor& a);
Tensor operator/(const Tensor& a, double c);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor relu(const Tensor& a);
// x * log(x) with the convention 0 * log 0 = 0 (inputs below a tiny floor
// use log(floor), keeping gradients bounded).
Tensor xlogx(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor sum(const Tensor& a);       // all entries -> 1x1
Tensor mean(const Tensor& a);      // all entries -> 1x1
Tensor row_sum(const Tensor& a);   // n x d -> n x 1
Tensor col_sum(const Tensor& a);   // n x d -> 1 x d
Tensor col_mean(const Tensor& a);  // n x d -> 1 x d
Tensor diagonal(const Tensor& a);  // n x n -> n x 1

// Numerically stable row softmax (row-max subtracted before exponentiation).
Tensor softmax_rows(const Tensor& a);

Tensor concat_cols(const std::vector<Tensor>& parts);

// Inverted dropout: train mode zeroes entries with probability p and scales
// survivors by 1/(1-p); eval mode and p == 0 return the input unchanged.
Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng);

// Batch normalization over columns with learnable affine parameters.
// Train mode normalizes by batch statistics (biased variance) and updates the
// running state in place; eval mode normalizes by the running state.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean,
                 std::vector<double>& running_var, Mode mode,
                 double momentum = 0.1, double eps = 1e-5);

}  // namespace cloven
