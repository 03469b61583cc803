#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cloven/rng.hpp"
#include "cloven/tensor.hpp"

namespace cloven {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Fully-connected layer, x (n x in) -> x*W + b (n x out).
// Weights and bias init uniform in +-1/sqrt(fan_in).
struct Dense {
  Tensor w;  // in x out
  Tensor b;  // 1 x out

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) const { return matmul(x, w) + b; }
  std::size_t in_dim() const { return w.rows(); }
  std::size_t out_dim() const { return w.cols(); }
  std::size_t parameter_count() const { return w.size() + b.size(); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Column-wise batch normalization with learnable affine and running state.
struct BatchNorm1d {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t width);

  Tensor forward(const Tensor& x, Mode mode) {
    return batchnorm(x, gamma, beta, running_mean, running_var, mode, momentum,
                     eps);
  }
  std::size_t width() const { return gamma.size(); }
  std::size_t parameter_count() const { return gamma.size() + beta.size(); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Dense stack with ReLU between layers and a linear final layer.
struct Mlp {
  std::vector<Dense> layers;

  Mlp() = default;
  // widths includes the input dimension: {in, h1, ..., out}.
  Mlp(const std::vector<std::size_t>& widths, Rng& rng);

  Tensor forward(const Tensor& x) const;
  std::size_t parameter_count() const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

}  // namespace cloven
