#include <algorithm>
#include <cmath>

#include "cloven/losses.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cloven;

namespace {

Tensor from_oracle(const oracle::Mat& m) {
  return Tensor(m.rows, m.cols, m.v);
}

oracle::Mat to_oracle(const Tensor& t) {
  return oracle::Mat(t.rows(), t.cols(), t.values());
}

oracle::Mat random_mat(std::size_t rows, std::size_t cols, Rng& rng) {
  oracle::Mat m(rows, cols);
  for (auto& v : m.v) v = rng.uniform(-1.0, 1.0);
  return m;
}

oracle::Mat random_assignment(std::size_t rows, std::size_t cols, Rng& rng) {
  oracle::Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      m.at(i, j) = rng.uniform(0.05, 1.0);
      total += m.at(i, j);
    }
    for (std::size_t j = 0; j < cols; ++j) m.at(i, j) /= total;
  }
  return m;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
  std::vector<double> rows(t.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy_n(&t.values()[perm[i] * t.cols()], t.cols(), &rows[i * t.cols()]);
  }
  return Tensor(t.rows(), t.cols(), std::move(rows));
}

}  // namespace

TEST_CASE("cosine similarity hand values") {
  CHECK(cosine_sim(Tensor(1, 3, {1, 2, 3}), Tensor(1, 3, {1, 2, 3})).item() ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cosine_sim(Tensor(1, 2, {1, 0}), Tensor(1, 2, {0, 1})).item() ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_sim(Tensor(1, 2, {1, 1}), Tensor(1, 2, {1, 0})).item() ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  // Column vectors are accepted too.
  CHECK(cosine_sim(Tensor(3, 1, {1, 2, 3}), Tensor(3, 1, {1, 2, 3})).item() ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("instance contrastive loss on the two-sample orthonormal case") {
  // N=2, V=1, fused == view, orthogonal unit rows, tau = 0.5:
  // per anchor -log(e^2 / (e^2 + 2)), summed over both anchors.
  const Tensor z(2, 2, {1, 0, 0, 1});
  const double value = instance_contrastive(z, {z}, 0.5).item();
  const double expected = -2.0 * std::log(std::exp(2.0) / (std::exp(2.0) + 2.0));
  CHECK(value == doctest::Approx(expected).epsilon(1e-9));

  const double oracle_value = oracle::icl(to_oracle(z), {to_oracle(z)}, 0.5);
  CHECK(value == doctest::Approx(oracle_value).epsilon(1e-12));
}

TEST_CASE("instance contrastive loss ignores positive row rescaling") {
  Rng rng(5);
  oracle::Mat z = random_mat(6, 4, rng);
  oracle::Mat h = random_mat(6, 4, rng);
  const double base =
      instance_contrastive(from_oracle(z), {from_oracle(h)}, 0.5).item();

  oracle::Mat h_scaled = h;
  for (std::size_t c = 0; c < h.cols; ++c) h_scaled.at(2, c) *= 7.5;
  for (std::size_t c = 0; c < h.cols; ++c) h_scaled.at(4, c) *= 0.03;
  const double scaled =
      instance_contrastive(from_oracle(z), {from_oracle(h_scaled)}, 0.5).item();
  CHECK(scaled == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("instance contrastive loss decreases as the positive aligns") {
  // One-parameter family: rotate h_0 toward z_0 with everything else fixed.
  double previous = 0.0;
  bool first = true;
  for (double angle : {1.2, 0.9, 0.6, 0.3, 0.05}) {
    const Tensor z(2, 2, {1, 0, 0, 1});
    const Tensor h(2, 2, {std::cos(angle), std::sin(angle), 0, 1});
    const double value = instance_contrastive(z, {h}, 0.5).item();
    if (!first) CHECK(value < previous);
    previous = value;
    first = false;
  }
}

TEST_CASE("instance contrastive loss needs at least two samples") {
  const Tensor z(1, 3, {1, 2, 3});
  CHECK_THROWS_AS(instance_contrastive(z, {z}, 0.5), std::invalid_argument);
}

TEST_CASE("category contrastive loss on one-hot orthogonal columns") {
  // k=2, identical one-hot assignments: per anchor -log(e^2 / (e^2 + 1)).
  const Tensor assign(2, 2, {1, 0, 0, 1});
  for (std::size_t views = 1; views <= 2; ++views) {
    const std::vector<Tensor> vs(views, assign);
    const double value = category_contrastive(assign, vs, 0.5).item();
    const double expected = -2.0 * static_cast<double>(views) *
                            std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
    CHECK(value == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("category contrastive loss is invariant to a shared column permutation") {
  Rng rng(6);
  oracle::Mat az = random_assignment(7, 3, rng);
  oracle::Mat ah = random_assignment(7, 3, rng);
  const double base =
      category_contrastive(from_oracle(az), {from_oracle(ah)}, 0.5).item();

  const std::vector<std::size_t> perm{2, 0, 1};
  auto permute_cols = [&perm](const oracle::Mat& m) {
    oracle::Mat out(m.rows, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, perm[c]);
    }
    return out;
  };
  const double permuted = category_contrastive(from_oracle(permute_cols(az)),
                                               {from_oracle(permute_cols(ah))},
                                               0.5)
                              .item();
  CHECK(permuted == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("collapsed identical columns maximize the category loss") {
  Rng rng(7);
  const oracle::Mat spread = random_assignment(6, 2, rng);
  oracle::Mat collapsed(6, 2);
  for (std::size_t r = 0; r < 6; ++r) {
    collapsed.at(r, 0) = 0.5;
    collapsed.at(r, 1) = 0.5;
  }
  const double healthy =
      category_contrastive(from_oracle(spread), {from_oracle(spread)}, 0.5)
          .item();
  const double degenerate = category_contrastive(from_oracle(collapsed),
                                                 {from_oracle(collapsed)}, 0.5)
                                .item();
  CHECK(degenerate > healthy);
}

TEST_CASE("category contrastive loss needs at least two clusters") {
  const Tensor assign(3, 1, {1, 1, 1});
  CHECK_THROWS_AS(category_contrastive(assign, {assign}, 0.5),
                  std::invalid_argument);
}

TEST_CASE("assignment entropy hand values") {
  SUBCASE("uniform assignments give log 2") {
    const Tensor uniform = Tensor::full(5, 2, 0.5);
    const double per_sample =
        assignment_entropy(uniform, uniform, EntropyMode::kPerSample).item();
    CHECK(per_sample == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const double marginal =
        assignment_entropy(uniform, uniform, EntropyMode::kMarginal).item();
    CHECK(marginal == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("one-hot assignments give exactly zero") {
    const Tensor onehot(4, 2, {1, 0, 0, 1, 1, 0, 0, 1});
    CHECK(assignment_entropy(onehot, onehot, EntropyMode::kPerSample).item() ==
          0.0);
  }
  SUBCASE("marginal equals per-sample when every row is identical") {
    const Tensor rows = Tensor(3, 3, {0.2, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.3});
    const double a =
        assignment_entropy(rows, rows, EntropyMode::kPerSample).item();
    const double b =
        assignment_entropy(rows, rows, EntropyMode::kMarginal).item();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("kernel matrix properties") {
  Rng rng(8);
  const Tensor hidden = Tensor::rand_uniform(6, 4, 1.0, rng);
  const Tensor q = kernel_matrix(hidden, 0.15, false);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(q.at(i, i) == 1.0);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(q.at(i, j) > 0.0);
      CHECK(q.at(i, j) <= 1.0);
      CHECK(q.at(i, j) == doctest::Approx(q.at(j, i)).epsilon(1e-12));
    }
  }

  // Identical points and the 2-sigma distance value.
  const double sigma = 0.15;
  const Tensor pair(2, 1, {0.0, 2.0 * sigma});
  const Tensor qp = kernel_matrix(pair, sigma, false);
  CHECK(qp.at(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  const Tensor same(2, 2, {0.3, 0.4, 0.3, 0.4});
  CHECK(kernel_matrix(same, sigma, false).at(0, 1) == 1.0);
}

TEST_CASE("ddc terms on engineered assignments") {
  SUBCASE("block-diagonal kernel with one-hot groups zeroes term1") {
    const Tensor assign(4, 2, {1, 0, 1, 0, 0, 1, 0, 1});
    const Tensor q(4, 4, {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1});
    const DdcTerms terms = ddc_loss_with_kernel(assign, q);
    CHECK(terms.term1.item() == 0.0);
    // One-hot rows in two groups of two: A A^T has ones for the two
    // same-group pairs, so the strict-upper mean is 2/6.
    CHECK(terms.term2.item() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("uniform rows give term2 = 1/k") {
    const std::size_t n = 6, k = 2;
    const Tensor assign = Tensor::full(n, k, 1.0 / static_cast<double>(k));
    const Tensor q = Tensor::identity(n);
    const DdcTerms terms = ddc_loss_with_kernel(assign, q);
    CHECK(terms.term2.item() ==
          doctest::Approx(1.0 / static_cast<double>(k)).epsilon(1e-12));
  }
  SUBCASE("terms recombine into the total") {
    Rng rng(9);
    const oracle::Mat assign = random_assignment(8, 3, rng);
    const oracle::Mat hidden = random_mat(8, 5, rng);
    LossConfig cfg;
    const DdcTerms terms = ddc_loss(from_oracle(assign), from_oracle(hidden), cfg);
    CHECK(terms.total.item() == doctest::Approx(terms.term1.item() +
                                                terms.term2.item() +
                                                terms.term3.item())
                                    .epsilon(1e-12));
  }
}

TEST_CASE("loss values match the independent oracles on random instances") {
  Rng rng(1234);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 4 + rng.below(13);  // up to 16
    const std::size_t d = 3 + rng.below(4);
    const std::size_t k = 2 + rng.below(3);  // up to 4
    const std::size_t views = 1 + rng.below(3);

    oracle::Mat z = random_mat(n, d, rng);
    std::vector<oracle::Mat> hs;
    std::vector<Tensor> h_tensors;
    oracle::Mat az = random_assignment(n, k, rng);
    std::vector<oracle::Mat> ahs;
    std::vector<Tensor> ah_tensors;
    for (std::size_t v = 0; v < views; ++v) {
      hs.push_back(random_mat(n, d, rng));
      h_tensors.push_back(from_oracle(hs.back()));
      ahs.push_back(random_assignment(n, k, rng));
      ah_tensors.push_back(from_oracle(ahs.back()));
    }
    const oracle::Mat hidden = random_mat(n, 5, rng);
    const double tau = 0.5;

    const double icl_engine =
        instance_contrastive(from_oracle(z), h_tensors, tau).item();
    CHECK(icl_engine ==
          doctest::Approx(oracle::icl(z, hs, tau)).epsilon(1e-9));

    const double ccl_engine =
        category_contrastive(from_oracle(az), ah_tensors, tau).item();
    CHECK(ccl_engine ==
          doctest::Approx(oracle::ccl(az, ahs, tau)).epsilon(1e-9));

    const double ent_engine =
        assignment_entropy(from_oracle(az), ah_tensors[0],
                           EntropyMode::kPerSample)
            .item();
    CHECK(ent_engine ==
          doctest::Approx(oracle::entropy_per_sample(az, ahs[0])).epsilon(1e-9));

    LossConfig cfg;
    const DdcTerms ddc_engine =
        ddc_loss(from_oracle(az), from_oracle(hidden), cfg);
    const oracle::DdcParts ddc_oracle =
        oracle::ddc(az, oracle::kernel(hidden, cfg.sigma));
    CHECK(ddc_engine.term1.item() == doctest::Approx(ddc_oracle.t1).epsilon(1e-9));
    CHECK(ddc_engine.term2.item() == doctest::Approx(ddc_oracle.t2).epsilon(1e-9));
    CHECK(ddc_engine.term3.item() == doctest::Approx(ddc_oracle.t3).epsilon(1e-9));

    const ContrastLoss contrast_engine = contrast_loss(
        from_oracle(z), h_tensors, from_oracle(az), ah_tensors, cfg);
    CHECK(contrast_engine.value.item() ==
          doctest::Approx(oracle::contrast(z, hs, az, ahs, tau, false))
              .epsilon(1e-9));
  }
}

TEST_CASE("contrast loss composition and breakdown") {
  Rng rng(21);
  const oracle::Mat z = random_mat(5, 4, rng);
  const oracle::Mat h = random_mat(5, 4, rng);
  const oracle::Mat az = random_assignment(5, 3, rng);
  const oracle::Mat ah = random_assignment(5, 3, rng);
  LossConfig cfg;

  SUBCASE("V=1 equals icl + ccl - entropy") {
    const ContrastLoss c = contrast_loss(from_oracle(z), {from_oracle(h)},
                                         from_oracle(az), {from_oracle(ah)},
                                         cfg);
    CHECK(c.value.item() ==
          doctest::Approx(c.icl + c.ccl - c.entropy).epsilon(1e-12));
  }
  SUBCASE("duplicating identical views leaves the value unchanged") {
    const double v1 = contrast_loss(from_oracle(z), {from_oracle(h)},
                                    from_oracle(az), {from_oracle(ah)}, cfg)
                          .value.item();
    const double v2 =
        contrast_loss(from_oracle(z), {from_oracle(h), from_oracle(h)},
                      from_oracle(az), {from_oracle(ah), from_oracle(ah)}, cfg)
            .value.item();
    CHECK(v2 == doctest::Approx(v1).epsilon(1e-12));
  }
}

TEST_CASE("total loss breakdown recombines and reaches every parameter") {
  Rng rng(22);
  ForwardProducts fwd;
  fwd.fused_proj = from_oracle(random_mat(6, 4, rng));
  fwd.view_proj = {from_oracle(random_mat(6, 4, rng)),
                   from_oracle(random_mat(6, 4, rng))};
  fwd.fused_assign = from_oracle(random_assignment(6, 3, rng));
  fwd.view_assign = {from_oracle(random_assignment(6, 3, rng)),
                     from_oracle(random_assignment(6, 3, rng))};
  fwd.fused_hidden = from_oracle(random_mat(6, 5, rng));
  LossConfig cfg;
  const TotalLoss loss = total_loss(fwd, cfg);
  CHECK(loss.parts.contrast ==
        doctest::Approx((loss.parts.icl + loss.parts.ccl - loss.parts.entropy) /
                        2.0)
            .epsilon(1e-12));
  CHECK(loss.parts.ddc == doctest::Approx(loss.parts.ddc_term1 +
                                          loss.parts.ddc_term2 +
                                          loss.parts.ddc_term3)
                              .epsilon(1e-12));
  CHECK(loss.parts.total ==
        doctest::Approx(loss.parts.contrast + loss.parts.ddc).epsilon(1e-12));
}

TEST_CASE("every loss term is invariant to a shared row permutation") {
  Rng rng(23);
  const oracle::Mat z = random_mat(6, 4, rng);
  const oracle::Mat h = random_mat(6, 4, rng);
  const oracle::Mat az = random_assignment(6, 3, rng);
  const oracle::Mat ah = random_assignment(6, 3, rng);
  const oracle::Mat hidden = random_mat(6, 5, rng);
  const std::vector<std::size_t> perm{3, 1, 5, 0, 4, 2};
  LossConfig cfg;

  auto p = [&perm](const oracle::Mat& m) {
    return permute_rows(Tensor(m.rows, m.cols, m.v), perm);
  };

  CHECK(instance_contrastive(p(z), {p(h)}, cfg.tau).item() ==
        doctest::Approx(
            instance_contrastive(from_oracle(z), {from_oracle(h)}, cfg.tau)
                .item())
            .epsilon(1e-9));
  CHECK(category_contrastive(p(az), {p(ah)}, cfg.tau).item() ==
        doctest::Approx(
            category_contrastive(from_oracle(az), {from_oracle(ah)}, cfg.tau)
                .item())
            .epsilon(1e-9));
  CHECK(assignment_entropy(p(az), p(ah), EntropyMode::kPerSample).item() ==
        doctest::Approx(assignment_entropy(from_oracle(az), from_oracle(ah),
                                           EntropyMode::kPerSample)
                            .item())
            .epsilon(1e-12));
  CHECK(ddc_loss(p(az), p(hidden), cfg).total.item() ==
        doctest::Approx(
            ddc_loss(from_oracle(az), from_oracle(hidden), cfg).total.item())
            .epsilon(1e-9));
}

TEST_CASE("the similarity audit certifies the asymmetric strategy") {
  Rng rng(24);
  ForwardProducts fwd;
  fwd.fused_proj = from_oracle(random_mat(6, 4, rng));
  fwd.view_proj = {from_oracle(random_mat(6, 4, rng)),
                   from_oracle(random_mat(6, 4, rng))};
  fwd.fused_assign = from_oracle(random_assignment(6, 3, rng));
  fwd.view_assign = {from_oracle(random_assignment(6, 3, rng)),
                     from_oracle(random_assignment(6, 3, rng))};
  fwd.fused_hidden = from_oracle(random_mat(6, 5, rng));

  LossConfig cfg;
  SimilarityAudit audit;
  total_loss(fwd, cfg, &audit);
  CHECK(audit.asymmetry_holds());
  CHECK(!audit.pairs().empty());
  for (const auto& [a, b] : audit.pairs()) {
    CHECK((a == SimilarityAudit::kFused || b == SimilarityAudit::kFused ||
           a == b));
  }

  // The symmetric ablation is exactly what the audit must flag.
  cfg.asymmetric = false;
  SimilarityAudit sym_audit;
  total_loss(fwd, cfg, &sym_audit);
  CHECK(!sym_audit.asymmetry_holds());
}

TEST_CASE("loss term toggles zero out their contributions") {
  Rng rng(25);
  ForwardProducts fwd;
  fwd.fused_proj = from_oracle(random_mat(6, 4, rng));
  fwd.view_proj = {from_oracle(random_mat(6, 4, rng))};
  fwd.fused_assign = from_oracle(random_assignment(6, 3, rng));
  fwd.view_assign = {from_oracle(random_assignment(6, 3, rng))};
  fwd.fused_hidden = from_oracle(random_mat(6, 5, rng));

  LossConfig cfg;
  cfg.use_icl = false;
  cfg.use_ccl = false;
  const TotalLoss ddc_only = total_loss(fwd, cfg);
  CHECK(ddc_only.parts.icl == 0.0);
  CHECK(ddc_only.parts.ccl == 0.0);
  CHECK(ddc_only.parts.entropy == 0.0);
  CHECK(ddc_only.parts.contrast == 0.0);
  CHECK(ddc_only.parts.total == doctest::Approx(ddc_only.parts.ddc));

  cfg = LossConfig{};
  cfg.use_ddc = false;
  const TotalLoss contrast_only = total_loss(fwd, cfg);
  CHECK(contrast_only.parts.ddc == 0.0);
  CHECK(contrast_only.parts.total ==
        doctest::Approx(contrast_only.parts.contrast));

  cfg = LossConfig{};
  cfg.use_icl = cfg.use_ccl = cfg.use_ddc = false;
  CHECK_THROWS_AS(total_loss(fwd, cfg), std::invalid_argument);
}

TEST_CASE("total loss stays finite across seeded random instances") {
  Rng rng(26);
  LossConfig cfg;
  for (int trial = 0; trial < 1000; ++trial) {
    ForwardProducts fwd;
    fwd.fused_proj = from_oracle(random_mat(5, 4, rng));
    fwd.view_proj = {from_oracle(random_mat(5, 4, rng)),
                     from_oracle(random_mat(5, 4, rng))};
    fwd.fused_assign = from_oracle(random_assignment(5, 3, rng));
    fwd.view_assign = {from_oracle(random_assignment(5, 3, rng)),
                       from_oracle(random_assignment(5, 3, rng))};
    fwd.fused_hidden = from_oracle(random_mat(5, 4, rng));
    const TotalLoss loss = total_loss(fwd, cfg);
    CHECK(std::isfinite(loss.parts.total));
  }
}
