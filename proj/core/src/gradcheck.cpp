#include "cloven/gradcheck.hpp"

#include <cmath>
#include <cstdlib>

namespace cloven {

double gradcheck(const std::function<Tensor(const Tensor&)>& f,
                 const Tensor& x, double h) {
  auto wrapped = [&f](const std::vector<Tensor>& xs) { return f(xs[0]); };
  return gradcheck_multi(wrapped, {x}, h);
}

double gradcheck_multi(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& xs, double h) {
  // Fresh leaves so the check never disturbs caller state.
  std::vector<Tensor> leaves;
  leaves.reserve(xs.size());
  for (const Tensor& x : xs) {
    leaves.emplace_back(x.rows(), x.cols(), x.values(), /*requires_grad=*/true);
  }

  std::vector<std::vector<double>> analytic(leaves.size());
  {
    Graph tape;
    Tensor loss = f(leaves);
    tape.backward(loss);
    for (std::size_t t = 0; t < leaves.size(); ++t) {
      analytic[t] = leaves[t].has_grad()
                        ? leaves[t].grad()
                        : std::vector<double>(leaves[t].size(), 0.0);
    }
  }

  double worst = 0.0;
  for (std::size_t t = 0; t < leaves.size(); ++t) {
    auto& data = leaves[t].raw_values();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = f(leaves).item();
      data[i] = saved - h;
      const double down = f(leaves).item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace cloven
