#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rtgp/data.hpp"
#include "rtgp/rff.hpp"

using namespace rtgp;

namespace {

Dataset random_instance(Index n, Index d, Rng& rng) {
  Dataset data;
  data.x.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) data.x(i, k) = rng.uniform();
  }
  data.y.resize(n);
  for (Index i = 0; i < n; ++i) data.y(i) = rng.normal();
  return data;
}

struct Welford {
  double sum = 0, sumsq = 0;
  long n = 0;
  void add(double v) { sum += v; sumsq += v * v; ++n; }
  double mean() const { return sum / n; }
  double se() const {
    const double m = mean();
    return std::sqrt(std::max(0.0, (sumsq - n * m * m) / (n - 1)) / n);
  }
};

}  // namespace

TEST_CASE("feature draws are reproducible and reject odd J") {
  const Hyperparams theta = Hyperparams::isotropic(1.0, 0.5, 0.1);
  Rng a(7), b(7);
  const RFFFeatures fa = sample_features(theta, 2, 10, a);
  const RFFFeatures fb = sample_features(theta, 2, 10, b);
  CHECK((fa.omega - fb.omega).cwiseAbs().maxCoeff() == 0.0);
  Rng c(7);
  CHECK_THROWS_AS(sample_features(theta, 2, 7, c), OddFeatureCount);
}

TEST_CASE("doubling the lengthscale halves the drawn frequencies") {
  Rng a(8), b(8);
  const RFFFeatures f1 =
      sample_features(Hyperparams::isotropic(1.0, 0.5, 0.1), 1, 8, a);
  const RFFFeatures f2 =
      sample_features(Hyperparams::isotropic(1.0, 1.0, 0.1), 1, 8, b);
  CHECK((f1.omega - 2.0 * f2.omega).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("empirical frequency variance matches the spectral density") {
  Rng rng(9);
  const double ell = 0.7;
  const RFFFeatures f =
      sample_features(Hyperparams::isotropic(1.0, ell, 0.1), 1, 20000, rng);
  Welford acc;
  for (Index i = 0; i < f.pair_count(); ++i) {
    acc.add(f.omega(i, 0) * f.omega(i, 0));
  }
  const double target = 1.0 / (ell * ell);
  CHECK(std::abs(acc.mean() - target) <= 3.0 * acc.se());
}

TEST_CASE("feature rows have squared norm o2 exactly") {
  Rng rng(10);
  const Hyperparams theta = Hyperparams::isotropic(1.7, 0.4, 0.1);
  const RFFFeatures f = sample_features(theta, 2, 12, rng);
  const Dataset data = random_instance(9, 2, rng);
  for (Index m : {1L, 3L, 6L}) {
    const FeatureMatrix phi = feature_map(data.x, f, m);
    for (Index i = 0; i < 9; ++i) {
      CHECK(phi.phi.row(i).squaredNorm() ==
            doctest::Approx(theta.outputscale_sq).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(feature_map(data.x, f, 7), PrefixOutOfRange);
  CHECK_THROWS_AS(feature_map(data.x, f, 0), PrefixOutOfRange);
}

TEST_CASE("nesting: smaller prefixes are leading columns of larger ones") {
  Rng rng(11);
  const Hyperparams theta = Hyperparams::isotropic(1.0, 0.3, 0.1);
  const RFFFeatures f = sample_features(theta, 1, 16, rng);
  const Dataset data = random_instance(5, 1, rng);
  const FeatureMatrix big = feature_map(data.x, f, 8);
  for (Index m : {1L, 2L, 5L}) {
    const FeatureMatrix small = feature_map(data.x, f, m);
    // same frequencies, different normalization
    const double ratio = big.scale / small.scale;
    CHECK((small.phi * ratio - big.phi.leftCols(2 * m)).cwiseAbs().maxCoeff() <
          1e-14);
  }
}

TEST_CASE("single frequency with omega'(x-x') = pi gives -o2") {
  RFFFeatures f;
  f.base_normals = Matrix::Constant(1, 1, 1.0);
  f.theta_at_draw = Hyperparams::isotropic(2.0, 1.0, 0.1);
  f.omega = f.base_normals;
  Matrix x(2, 1);
  x << 0.0, 3.14159265358979323846;
  const FeatureMatrix phi = feature_map(x, f, 1);
  CHECK(phi.phi.row(0).dot(phi.phi.row(1)) == doctest::Approx(-2.0));
}

TEST_CASE("mean feature inner product is the kernel value") {
  Rng rng(12);
  const Hyperparams theta = Hyperparams::isotropic(1.3, 0.6, 0.1);
  Matrix x(2, 2);
  x << 0.1, 0.9, 0.5, 0.2;
  Welford acc;
  for (int rep = 0; rep < 5000; ++rep) {
    Rng child = rng.child(rep);
    const RFFFeatures f = sample_features(theta, 2, 2, child);
    const FeatureMatrix phi = feature_map(x, f, 1);
    acc.add(phi.phi.row(0).dot(phi.phi.row(1)));
  }
  const double expect =
      oracle::rbf_scalar(x.row(0).transpose(), x.row(1).transpose(), theta);
  CHECK(std::abs(acc.mean() - expect) <= 3.0 * acc.se());
}

TEST_CASE("woodbury likelihood equals the dense evaluation") {
  Rng rng(13);
  for (Index n : {40L, 200L}) {
    const Dataset data = random_instance(n, 2, rng);
    const Hyperparams theta = Hyperparams::isotropic(1.1, 0.5, 0.09);
    for (Index m : {5L, 32L}) {
      Rng child = rng.child(static_cast<std::uint64_t>(n * 100 + m));
      const RFFFeatures f = sample_features(theta, 2, 2 * m, child);
      const FeatureMatrix phi = feature_map(data.x, f, m);
      const MLLTerms fast = mll_rff(phi, data.y, theta.noise_sq);

      Matrix ktilde = phi.phi * phi.phi.transpose();
      ktilde.diagonal().array() += theta.noise_sq;
      const Matrix l = cholesky_factor(ktilde);
      const double logdet_dense = logdet_from_chol(l);
      const double invquad_dense = data.y.dot(solve_posdef(l, data.y));
      CHECK(fast.logdet == doctest::Approx(logdet_dense).epsilon(1e-8));
      CHECK(fast.invquad == doctest::Approx(invquad_dense).epsilon(1e-8));
    }
  }
}

TEST_CASE("zero features reduce to the pure noise model") {
  FeatureMatrix phi;
  phi.phi = Matrix::Zero(6, 4);
  phi.scale = 1.0;
  Vector y(6);
  y << 1, -1, 2, 0, 1, 3;
  const MLLTerms terms = mll_rff(phi, y, 0.5);
  CHECK(terms.logdet == doctest::Approx(6.0 * std::log(0.5)).epsilon(1e-12));
  CHECK(terms.invquad == doctest::Approx(y.squaredNorm() / 0.5).epsilon(1e-12));

  const MLLTerms zero_y = mll_rff(phi, Vector::Zero(6), 0.5);
  CHECK(zero_y.invquad == 0.0);
}

TEST_CASE("rff gradient matches finite differences under frozen draws") {
  Rng rng(14);
  for (int rep = 0; rep < 6; ++rep) {
    const Index d = 1 + rep % 2;
    const Dataset data = random_instance(12, d, rng);
    Hyperparams theta;
    theta.outputscale_sq = 0.6 + rng.uniform();
    theta.lengthscales = Vector::Constant(rep % 3 == 0 ? d : 1, 0.0);
    for (Index k = 0; k < theta.lengthscales.size(); ++k) {
      theta.lengthscales(k) = 0.3 + 0.4 * rng.uniform();
    }
    theta.noise_sq = 0.05 + 0.1 * rng.uniform();
    const std::uint64_t draw_seed = 500 + rep;

    const Index m = 4;
    Rng draw(draw_seed);
    const RFFFeatures f = sample_features(theta, d, 2 * m, draw);
    const Vector analytic = grad_rff(data, theta, f, m);

    for (Index p = 0; p < theta.param_count(); ++p) {
      const double fd = oracle::central_fd(
          [&](double v) {
            Vector raw = params_to_vector(theta);
            raw(p) = v;
            const Hyperparams t =
                params_from_vector(raw, theta.lengthscales.size());
            // same base normals, ω re-derived at the perturbed θ
            Rng r(draw_seed);
            const RFFFeatures ft = sample_features(t, d, 2 * m, r);
            return mll_rff(feature_map(data.x, ft, m), data.y, t.noise_sq)
                .total_nll;
          },
          params_to_vector(theta)(p));
      CHECK(oracle::rel_err(analytic(p), fd) <= 1e-5);
    }
  }
}

TEST_CASE("sigma2 gradient at zero targets is half the trace") {
  Rng rng(15);
  const Dataset base = random_instance(10, 1, rng);
  Dataset data = base;
  data.y.setZero();
  const Hyperparams theta = Hyperparams::isotropic(1.0, 0.4, 0.2);
  Rng draw(16);
  const RFFFeatures f = sample_features(theta, 1, 8, draw);
  const Vector grad = grad_rff(data, theta, f, 4);

  const FeatureMatrix phi = feature_map(data.x, f, 4);
  Matrix ktilde = phi.phi * phi.phi.transpose();
  ktilde.diagonal().array() += theta.noise_sq;
  const double expect = 0.5 * oracle::lu_inverse(ktilde).trace();
  CHECK(grad(2) == doctest::Approx(expect).epsilon(1e-10));
  CHECK(grad(2) > 0.0);
}

TEST_CASE("theorem-2 directions in expectation at J=20, decay along the grid") {
  Rng rng(17);
  const Dataset data = random_instance(60, 1, rng);
  const Hyperparams theta = Hyperparams::isotropic(1.0, 0.25, 0.04);
  const MLLTerms exact = mll_exact(data, theta);

  double prev_logdet_bias = std::numeric_limits<double>::infinity();
  double prev_invquad_bias = std::numeric_limits<double>::infinity();
  const std::vector<Index> grid = {20, 50, 100, 200};
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    Welford logdet_acc, invquad_acc;
    for (int rep = 0; rep < 500; ++rep) {
      Rng child = rng.child(static_cast<std::uint64_t>(gi * 10000 + rep));
      const RFFFeatures f =
          sample_features(theta, 1, grid[gi], child);
      const MLLTerms terms = mll_rff(
          feature_map(data.x, f, f.pair_count()), data.y, theta.noise_sq);
      logdet_acc.add(terms.logdet);
      invquad_acc.add(terms.invquad);
    }
    if (gi == 0) {
      // J=20: both biases exceed 3 SE in the directions of the theorem
      CHECK(exact.logdet - logdet_acc.mean() > 3.0 * logdet_acc.se());
      CHECK(invquad_acc.mean() - exact.invquad > 3.0 * invquad_acc.se());
    }
    const double logdet_bias = std::abs(logdet_acc.mean() - exact.logdet);
    const double invquad_bias = std::abs(invquad_acc.mean() - exact.invquad);
    CHECK(logdet_bias < prev_logdet_bias);
    CHECK(invquad_bias < prev_invquad_bias);
    prev_logdet_bias = logdet_bias;
    prev_invquad_bias = invquad_bias;
  }
}
