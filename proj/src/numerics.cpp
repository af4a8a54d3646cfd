#include "rtgp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "rtgp/rng.hpp"

namespace rtgp {

Matrix cholesky_factor(const Matrix& a, double jitter) {
  const Index n = a.rows();
  if (a.cols() != n) {
    throw DimensionMismatch("cholesky_factor: matrix must be square");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DimensionMismatch("cholesky_factor: matrix is not symmetric");
  }

  Matrix l = Matrix::Zero(n, n);
  l.triangularView<Eigen::Lower>() = a.triangularView<Eigen::Lower>();
  l.diagonal().array() += jitter;

  // Left-looking factorization; failure of a pivot is reported rather than
  // patched so callers can distinguish genuine indefiniteness.
  for (Index j = 0; j < n; ++j) {
    double d = l(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= 0.0 || !std::isfinite(d)) {
      throw NotPositiveDefinite("cholesky_factor: pivot " + std::to_string(j) +
                                " is not positive");
    }
    d = std::sqrt(d);
    l(j, j) = d;
    const Index m = n - j - 1;
    if (m > 0) {
      l.col(j).tail(m) =
          (l.col(j).tail(m) -
           l.bottomLeftCorner(m, j) * l.row(j).head(j).transpose()) /
          d;
    }
  }
  return l;
}

Matrix solve_posdef(const Matrix& chol_lower, const Matrix& b) {
  if (chol_lower.rows() != b.rows()) {
    throw DimensionMismatch("solve_posdef: rhs has " + std::to_string(b.rows()) +
                            " rows, factor has " +
                            std::to_string(chol_lower.rows()));
  }
  Matrix x = chol_lower.triangularView<Eigen::Lower>().solve(b);
  chol_lower.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Vector solve_posdef(const Matrix& chol_lower, const Vector& b) {
  return solve_posdef(chol_lower, Matrix(b)).col(0);
}

double logdet_from_chol(const Matrix& chol_lower) {
  double acc = 0.0;
  for (Index i = 0; i < chol_lower.rows(); ++i) {
    const double d = chol_lower(i, i);
    if (d <= 0.0) {
      throw NotPositiveDefinite("logdet_from_chol: nonpositive diagonal entry");
    }
    acc += std::log(d);
  }
  return 2.0 * acc;
}

Matrix SymTridiagonal::dense() const {
  const Index n = size();
  Matrix t = Matrix::Zero(n, n);
  t.diagonal() = diag;
  if (n > 1) {
    t.diagonal(1) = offdiag;
    t.diagonal(-1) = offdiag;
  }
  return t;
}

TridiagEig eig_sym_tridiag(const SymTridiagonal& t) {
  const Index n = t.size();
  if (n < 1) throw DimensionMismatch("eig_sym_tridiag: empty matrix");
  if (n > 1 && t.offdiag.size() != n - 1) {
    throw DimensionMismatch("eig_sym_tridiag: offdiag length must be J-1");
  }

  std::vector<double> d(t.diag.data(), t.diag.data() + n);
  std::vector<double> e(n, 0.0);
  for (Index i = 0; i + 1 < n; ++i) e[i] = t.offdiag(i);
  std::vector<double> w(n, 0.0);
  w[0] = 1.0;

  // Implicit-shift QL with Wilkinson shifts. J stays small here, so the
  // O(J²) rotation count is irrelevant; the iteration budget guards against
  // pathological non-convergence.
  const long budget = 30 * static_cast<long>(n);
  long iterations = 0;
  for (Index l = 0; l < n; ++l) {
    Index m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m != l) {
        if (++iterations > budget) {
          throw ConvergenceFailure("eig_sym_tridiag: QL exceeded 30*J sweeps");
        }
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (Index i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          f = w[i + 1];
          w[i + 1] = s * w[i] + c * f;
          w[i] = c * w[i] - s * f;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return d[a] < d[b]; });

  TridiagEig out;
  out.eigenvalues.resize(n);
  out.first_components.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = d[order[i]];
    out.first_components(i) = w[order[i]];
  }
  return out;
}

ProbeSet sample_probes(Index n, Index t, ProbeKind kind, std::uint64_t seed) {
  if (n < 1 || t < 1) {
    throw DimensionMismatch("sample_probes: n and t must be >= 1");
  }
  ProbeSet set;
  set.kind = kind;
  set.seed = seed;
  set.probes.resize(n, t);
  for (Index j = 0; j < t; ++j) {
    // One stream per probe so parallel consumers can regenerate any column.
    Rng rng(seed, static_cast<std::uint64_t>(j));
    for (Index i = 0; i < n; ++i) {
      set.probes(i, j) =
          kind == ProbeKind::rademacher ? rng.rademacher() : rng.normal();
    }
  }
  return set;
}

}  // namespace rtgp
