#include "cloven/nn.hpp"

#include <cmath>

namespace cloven {

Dense::Dense(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w = Tensor::rand_uniform(in, out, bound, rng, /*requires_grad=*/true);
  b = Tensor::rand_uniform(1, out, bound, rng, /*requires_grad=*/true);
}

void Dense::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

BatchNorm1d::BatchNorm1d(std::size_t width)
    : gamma(Tensor::full(1, width, 1.0, /*requires_grad=*/true)),
      beta(Tensor::zeros(1, width, /*requires_grad=*/true)),
      running_mean(width, 0.0),
      running_var(width, 1.0) {}

void BatchNorm1d::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Rng& rng) {
  if (widths.size() < 2) {
    detail::fail_contract("mlp: need at least input and output widths");
  }
  layers.reserve(widths.size() - 1);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(widths[i], widths[i + 1], rng);
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Dense& l : layers) n += l.parameter_count();
  return n;
}

void Mlp::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(prefix + ".l" + std::to_string(i), out);
  }
}

}  // namespace cloven
