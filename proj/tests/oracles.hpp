// Test-only reference implementations, independent of the library's own
// algorithm paths: Jacobi eigensolve, LU-based inverses, central finite
// differences, and brute-force kernel evaluation.
#pragma once

#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "rtgp/kernels.hpp"
#include "rtgp/numerics.hpp"
#include "rtgp/rng.hpp"

namespace oracle {

using rtgp::Index;
using rtgp::Matrix;
using rtgp::Vector;

// Cyclic Jacobi rotations on a dense symmetric matrix. Returns ascending
// eigenvalues and the full eigenvector matrix (columns).
inline std::pair<Vector, Matrix> jacobi_eig(Matrix a) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-26) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Eigen::JacobiRotation<double> rot(c, s);
        a.applyOnTheLeft(p, q, rot.transpose());
        a.applyOnTheRight(p, q, rot);
        v.applyOnTheRight(p, q, rot);
      }
    }
  }
  Vector evals = a.diagonal();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index i, Index j) { return evals(i) < evals(j); });
  Vector sorted(n);
  Matrix vs(n, n);
  for (Index i = 0; i < n; ++i) {
    sorted(i) = evals(order[i]);
    vs.col(i) = v.col(order[i]);
  }
  return {sorted, vs};
}

// Partial-pivot LU inverse: algorithmically independent of the Cholesky
// route under test.
inline Matrix lu_inverse(const Matrix& a) { return a.fullPivLu().inverse(); }

inline double lu_logdet(const Matrix& a) {
  const auto [evals, evecs] = jacobi_eig(a);
  double acc = 0.0;
  for (Index i = 0; i < evals.size(); ++i) acc += std::log(evals(i));
  return acc;
}

// Central finite difference of a scalar function of one raw parameter.
inline double central_fd(const std::function<double(double)>& f, double x,
                         double rel_step = 1e-6) {
  const double h = rel_step * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Gradient check helper: relative error with a floor for near-zero pairs.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Random SPD matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(Index n, rtgp::Rng& rng, double lo = 0.5,
                         double hi = 4.0) {
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  }
  const Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ();
  Vector evals(n);
  for (Index i = 0; i < n; ++i) evals(i) = lo + (hi - lo) * rng.uniform();
  return q * evals.asDiagonal() * q.transpose();
}

// Scalar RBF kernel evaluated pair by pair.
inline double rbf_scalar(const Vector& a, const Vector& b,
                         const rtgp::Hyperparams& theta) {
  double sq = 0.0;
  for (Index k = 0; k < a.size(); ++k) {
    const double d = (a(k) - b(k)) / theta.lengthscale_for_dim(k);
    sq += d * d;
  }
  return theta.outputscale_sq * std::exp(-0.5 * sq);
}

inline rtgp::Dataset random_gp_instance(Index n, Index d, rtgp::Rng& rng,
                                        const rtgp::Hyperparams& theta) {
  rtgp::Dataset data;
  data.x.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) data.x(i, k) = rng.uniform();
  }
  data.y.resize(n);
  for (Index i = 0; i < n; ++i) data.y(i) = rng.normal();
  (void)theta;
  return data;
}

}  // namespace oracle
