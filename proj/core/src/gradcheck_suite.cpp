#include <cmath>

#include "cloven/experiments.hpp"
#include "cloven/gradcheck.hpp"

namespace cloven {

namespace {

// Random entries bounded away from 0 so relu/div kinks never sit within the
// finite-difference step.
Tensor rand_signed(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> d(rows * cols);
  for (auto& v : d) {
    const double mag = rng.uniform(0.2, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor(rows, cols, std::move(d));
}

Tensor rand_positive(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> d(rows * cols);
  for (auto& v : d) v = rng.uniform(0.1, 1.1);
  return Tensor(rows, cols, std::move(d));
}

// Row-stochastic matrix with interior entries.
Tensor rand_assignment(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> d(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      d[i * cols + j] = rng.uniform(0.2, 1.0);
      total += d[i * cols + j];
    }
    for (std::size_t j = 0; j < cols; ++j) d[i * cols + j] /= total;
  }
  return Tensor(rows, cols, std::move(d));
}

// Finite-difference check of the whole network: every parameter of a small
// model against the full objective.
double full_model_check(std::uint64_t seed, double h) {
  ModelConfig mc;
  mc.views = 2;
  mc.encoder_widths = {{5, 8, 5}, {5, 8, 5}};
  mc.common_dim = 5;
  mc.fusion_kind = FusionKind::kResidual;
  mc.fusion_layers = 2;
  mc.dropout_p = 0.1;
  mc.clusters = 3;
  mc.projection_widths = {5, 5, 5};
  mc.clustering_hidden_width = 6;

  Rng init(seed);
  CloVenModel model(mc, init);

  Rng data_rng = Rng::fork(seed, 3);
  std::vector<Tensor> views{rand_signed(8, 5, data_rng),
                            rand_signed(8, 5, data_rng)};
  LossConfig lc;

  const std::uint64_t dropout_seed = seed ^ 0xD0u;
  auto loss_value = [&]() {
    Rng dropout_rng(dropout_seed);
    ForwardProducts fwd = model.forward(views, Mode::kTrain, &dropout_rng);
    return total_loss(fwd, lc);
  };

  std::vector<Tensor> params = model.parameter_list();
  std::vector<std::vector<double>> analytic;
  {
    Graph tape;
    TotalLoss loss = loss_value();
    for (Tensor& p : params) p.zero_grad();
    tape.backward(loss.value);
    for (Tensor& p : params) analytic.push_back(p.grad());
  }

  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& w = params[t].raw_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss_value().parts.total;
      w[i] = saved - h;
      const double down = loss_value().parts.total;
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed) {
  const double h = 1e-5;
  std::vector<GradCheckEntry> out;
  Rng rng(seed);

  auto add = [&out](const std::string& name, double err, double tol = 1e-4) {
    out.push_back(GradCheckEntry{name, err, tol});
  };

  // Fixed weighting makes reduction gradients non-uniform.
  const Tensor r65 = rand_signed(6, 5, rng);
  const Tensor r66 = rand_signed(6, 6, rng);
  const Tensor x65 = rand_signed(6, 5, rng);
  const Tensor y65 = rand_signed(6, 5, rng);
  const Tensor row = rand_signed(1, 5, rng);
  const Tensor col = rand_signed(6, 1, rng);

  add("sum_of_squares",
      gradcheck([](const Tensor& x) { return sum(x * x) / 2.0; }, x65, h),
      1e-8);

  add("add", gradcheck_multi(
                 [&](const std::vector<Tensor>& v) {
                   return sum((v[0] + v[1]) * r65);
                 },
                 {x65, y65}, h));
  add("sub", gradcheck_multi(
                 [&](const std::vector<Tensor>& v) {
                   return sum((v[0] - v[1]) * r65);
                 },
                 {x65, y65}, h));
  add("mul", gradcheck_multi(
                 [&](const std::vector<Tensor>& v) {
                   return sum((v[0] * v[1]) * r65);
                 },
                 {x65, y65}, h));
  add("div", gradcheck_multi(
                 [&](const std::vector<Tensor>& v) {
                   return sum((v[0] / v[1]) * r65);
                 },
                 {x65, y65}, h));
  add("broadcast_row", gradcheck_multi(
                           [&](const std::vector<Tensor>& v) {
                             return sum((v[0] + v[1]) * r65);
                           },
                           {x65, row}, h));
  add("broadcast_col", gradcheck_multi(
                           [&](const std::vector<Tensor>& v) {
                             return sum((v[0] * v[1]) * r65);
                           },
                           {x65, col}, h));
  add("neg", gradcheck([&](const Tensor& x) { return sum((-x) * r65); }, x65, h));
  add("exp", gradcheck([&](const Tensor& x) { return sum(exp(x) * r65); }, x65, h));

  const Tensor pos65 = rand_positive(6, 5, rng);
  add("log", gradcheck([&](const Tensor& x) { return sum(log(x) * r65); },
                       pos65, h));
  add("sqrt", gradcheck([&](const Tensor& x) { return sum(sqrt(x) * r65); },
                        pos65, h));
  add("xlogx", gradcheck([&](const Tensor& x) { return sum(xlogx(x) * r65); },
                         pos65, h));
  add("relu", gradcheck([&](const Tensor& x) { return sum(relu(x) * r65); },
                        x65, h));

  add("matmul", gradcheck_multi(
                    [&](const std::vector<Tensor>& v) {
                      return sum(matmul(v[0], transpose(v[1])) * r66);
                    },
                    {x65, y65}, h));
  add("transpose",
      gradcheck([&](const Tensor& x) {
        return sum(transpose(x) * transpose(r65));
      }, x65, h));
  add("sum", gradcheck([](const Tensor& x) { return sum(x); }, x65, h), 1e-8);
  add("mean", gradcheck([](const Tensor& x) { return mean(x); }, x65, h), 1e-8);
  add("row_sum", gradcheck(
                     [&](const Tensor& x) { return sum(row_sum(x) * col); },
                     x65, h));
  add("col_sum", gradcheck(
                     [&](const Tensor& x) { return sum(col_sum(x) * row); },
                     x65, h));
  add("diagonal", gradcheck(
                      [&](const Tensor& x) {
                        return sum(diagonal(matmul(x, transpose(x))));
                      },
                      x65, h));
  add("softmax", gradcheck(
                     [&](const Tensor& x) {
                       return sum(softmax_rows(x) * r65);
                     },
                     x65, h));
  add("concat_cols", gradcheck_multi(
                         [&](const std::vector<Tensor>& v) {
                           return sum(xlogx(exp(concat_cols({v[0], v[1]}))));
                         },
                         {x65, y65}, h));

  const std::uint64_t dropout_seed = seed ^ 0xABCDu;
  add("dropout", gradcheck(
                     [&](const Tensor& x) {
                       Rng mask_rng(dropout_seed);
                       return sum(dropout(x, 0.3, Mode::kTrain, mask_rng) * r65);
                     },
                     x65, h));

  {
    const Tensor bn_in = rand_signed(8, 5, rng);
    const Tensor gamma = rand_positive(1, 5, rng);
    const Tensor beta = rand_signed(1, 5, rng);
    const Tensor bn_weight = rand_signed(8, 5, rng);
    add("batchnorm", gradcheck_multi(
                         [&](const std::vector<Tensor>& v) {
                           std::vector<double> rm(5, 0.0), rv(5, 1.0);
                           const Tensor y = batchnorm(v[0], v[1], v[2], rm, rv,
                                                      Mode::kTrain);
                           return sum(y * bn_weight);
                         },
                         {bn_in, gamma, beta}, h));
  }

  // Loss terms on small random instances (N=8, V=2, d=5, k=3).
  const std::size_t N = 8, k = 3;
  const Tensor z_proj = rand_signed(N, 5, rng);
  const std::vector<Tensor> h_proj{rand_signed(N, 5, rng),
                                   rand_signed(N, 5, rng)};
  const Tensor a_z = rand_assignment(N, k, rng);
  const std::vector<Tensor> a_h{rand_assignment(N, k, rng),
                                rand_assignment(N, k, rng)};
  const Tensor hidden = rand_signed(N, 6, rng);
  LossConfig lc;

  add("cosine_sim", gradcheck_multi(
                        [&](const std::vector<Tensor>& v) {
                          return cosine_sim(v[0], v[1]);
                        },
                        {rand_signed(1, 5, rng), rand_signed(1, 5, rng)}, h));
  add("instance_contrastive",
      gradcheck_multi(
          [&](const std::vector<Tensor>& v) {
            return instance_contrastive(v[0], {v[1], v[2]}, lc.tau);
          },
          {z_proj, h_proj[0], h_proj[1]}, h));
  add("category_contrastive",
      gradcheck_multi(
          [&](const std::vector<Tensor>& v) {
            return category_contrastive(v[0], {v[1], v[2]}, lc.tau);
          },
          {a_z, a_h[0], a_h[1]}, h));
  add("assignment_entropy",
      gradcheck_multi(
          [&](const std::vector<Tensor>& v) {
            return assignment_entropy(v[0], v[1], EntropyMode::kPerSample);
          },
          {a_z, a_h[0]}, h));
  add("assignment_entropy_marginal",
      gradcheck_multi(
          [&](const std::vector<Tensor>& v) {
            return assignment_entropy(v[0], v[1], EntropyMode::kMarginal);
          },
          {a_z, a_h[0]}, h));
  const Tensor kernel_weight = rand_signed(N, N, rng);
  add("kernel_matrix",
      gradcheck(
          [&](const Tensor& x) {
            return sum(kernel_matrix(x, 0.5, false) * kernel_weight);
          },
          hidden, h));
  add("contrast_loss",
      gradcheck_multi(
          [&](const std::vector<Tensor>& v) {
            return contrast_loss(v[0], {v[1], v[2]}, v[3], {v[4], v[5]}, lc)
                .value;
          },
          {z_proj, h_proj[0], h_proj[1], a_z, a_h[0], a_h[1]}, h));
  add("ddc_loss", gradcheck_multi(
                      [&](const std::vector<Tensor>& v) {
                        return ddc_loss(v[0], v[1], lc).total;
                      },
                      {a_z, hidden}, h));

  add("total_loss_all_parameters", full_model_check(seed, h));

  return out;
}

}  // namespace cloven
