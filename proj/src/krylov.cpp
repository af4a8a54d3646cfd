#include "rtgp/krylov.hpp"

#include <cmath>
#include <memory>

namespace rtgp {

namespace {
// Below this, quadratic forms are treated as exact convergence rather than
// divided through.
constexpr double kBreakdownFloor = 1e-300;
}  // namespace

Vector CGTrace::partial_solution(Index j) const {
  Vector x = Vector::Zero(n);
  const Index m = std::min<Index>(j, iterations());
  for (Index i = 0; i < m; ++i) x += increments[static_cast<size_t>(i)];
  return x;
}

namespace {

CGTrace cg_single(const LinearOperator& a, const Vector& b,
                  const Preconditioner& precond, Index max_iter, double tol) {
  const Index n = b.size();
  CGTrace trace;
  trace.n = n;
  trace.increments.reserve(static_cast<size_t>(max_iter));

  Vector x = Vector::Zero(n);
  Vector r = b;
  Vector z = precond(r);
  Vector d = z;
  double rz = r.dot(z);
  if (rz < 0.0) {
    throw BreakdownError("mbcg: preconditioner is not positive definite");
  }

  std::vector<double> t_diag, t_off;
  double prev_alpha = 0.0, prev_beta = 0.0;
  bool converged = false;

  for (Index j = 1; j <= max_iter && !converged; ++j) {
    if (rz <= kBreakdownFloor) {
      // Exact convergence in finite precision; remaining increments are 0.
      trace.converged_at = j - 1;
      break;
    }
    const Vector v = a.apply(d);
    const double denom = d.dot(v);
    if (denom <= 0.0) {
      if (std::abs(denom) <= kBreakdownFloor) {
        trace.converged_at = j - 1;
        break;
      }
      throw BreakdownError("mbcg: dᵀAd <= 0, operator is not SPD");
    }
    const double alpha = rz / denom;

    trace.increments.push_back(alpha * d);
    x += trace.increments.back();
    r -= alpha * v;
    const double rnorm = r.norm();

    trace.alphas.push_back(alpha);
    trace.residual_norms.push_back(rnorm);

    // [T]ⱼⱼ = 1/αⱼ + β_{j−1}/α_{j−1}; [T]_{j−1,j} = √β_{j−1}/α_{j−1}
    if (j == 1) {
      t_diag.push_back(1.0 / alpha);
    } else {
      t_diag.push_back(1.0 / alpha + prev_beta / prev_alpha);
      t_off.push_back(std::sqrt(prev_beta) / prev_alpha);
    }

    if (rnorm <= tol) {
      trace.converged_at = j;
      converged = true;
    }

    z = precond(r);
    const double rz_new = r.dot(z);
    if (rz_new < 0.0) {
      throw BreakdownError("mbcg: preconditioner is not positive definite");
    }
    const double beta = rz_new / rz;
    d = z + beta * d;
    trace.betas.push_back(beta);
    prev_alpha = alpha;
    prev_beta = beta;
    rz = rz_new;
  }

  trace.tridiag.diag.resize(static_cast<Index>(t_diag.size()));
  for (size_t i = 0; i < t_diag.size(); ++i) {
    trace.tridiag.diag(static_cast<Index>(i)) = t_diag[i];
  }
  trace.tridiag.offdiag.resize(static_cast<Index>(t_off.size()));
  for (size_t i = 0; i < t_off.size(); ++i) {
    trace.tridiag.offdiag(static_cast<Index>(i)) = t_off[i];
  }
  return trace;
}

}  // namespace

MbcgResult mbcg(const LinearOperator& a, const Matrix& b,
                const Preconditioner& precond, Index max_iter, double tol) {
  if (a.n != b.rows()) {
    throw DimensionMismatch("mbcg: rhs rows do not match operator size");
  }
  if (max_iter < 1) throw DimensionMismatch("mbcg: max_iter must be >= 1");

  MbcgResult result;
  result.solutions.resize(b.rows(), b.cols());
  result.traces.reserve(static_cast<size_t>(b.cols()));
  for (Index c = 0; c < b.cols(); ++c) {
    CGTrace trace = cg_single(a, b.col(c), precond, max_iter, tol);
    result.solutions.col(c) = trace.solution();
    result.traces.push_back(std::move(trace));
  }
  return result;
}

Preconditioner pivoted_cholesky(const Matrix& k, Index rank, double noise_sq) {
  const Index n = k.rows();
  if (k.cols() != n) throw DimensionMismatch("pivoted_cholesky: square input");
  if (rank < 0 || rank > n) {
    throw DimensionMismatch("pivoted_cholesky: rank must be in [0, N]");
  }
  if (rank == 0) return Preconditioner::identity();

  const double diag_scale = std::max(1.0, k.diagonal().cwiseAbs().maxCoeff());
  Matrix l = Matrix::Zero(n, rank);
  Vector resid = k.diagonal();
  Index m = 0;
  for (; m < rank; ++m) {
    if (resid.minCoeff() < -1e-12 * diag_scale) {
      throw NegativePivot("pivoted_cholesky: negative diagonal residual");
    }
    Index pivot_row;
    const double pivot = resid.maxCoeff(&pivot_row);
    if (pivot <= 1e-14 * diag_scale) break;  // numerically exact already
    const double root = std::sqrt(pivot);
    l.col(m) = (k.col(pivot_row) - l.leftCols(m) * l.row(pivot_row).head(m).transpose()) / root;
    resid -= l.col(m).cwiseAbs2();
  }

  // (L·Lᵀ + σ²I)⁻¹v = (v − L·M⁻¹·Lᵀv)/σ² with M = LᵀL + σ²I.
  auto lr = std::make_shared<Matrix>(l.leftCols(m));
  Matrix inner = lr->transpose() * (*lr);
  inner.diagonal().array() += noise_sq;
  auto inner_chol = std::make_shared<Matrix>(cholesky_factor(inner));

  Preconditioner p;
  p.kind = Preconditioner::Kind::pivoted_cholesky;
  p.rank = m;
  p.apply = [lr, inner_chol, noise_sq](const Vector& v) -> Vector {
    const Vector w = solve_posdef(*inner_chol, Vector(lr->transpose() * v));
    return (v - (*lr) * w) / noise_sq;
  };
  return p;
}

Vector invquad_cg(const CGTrace& trace, const Vector& y) {
  const Index j_max = trace.iterations();
  Vector u(j_max);
  double acc = 0.0;
  for (Index j = 0; j < j_max; ++j) {
    acc += y.dot(trace.increments[static_cast<size_t>(j)]);
    u(j) = acc;
  }
  return u;
}

Vector slq_prefix_values(const CGTrace& trace, double probe_sqnorm) {
  const Index j_max = trace.iterations();
  Vector v(j_max);
  for (Index j = 1; j <= j_max; ++j) {
    const TridiagEig eig = eig_sym_tridiag(trace.tridiag.leading(j));
    double quad = 0.0;
    for (Index i = 0; i < j; ++i) {
      const double ritz = eig.eigenvalues(i);
      if (ritz <= 0.0) {
        throw NonPositiveRitzValue("slq: Ritz value " + std::to_string(ritz) +
                                   " at block size " + std::to_string(j));
      }
      quad += eig.first_components(i) * eig.first_components(i) * std::log(ritz);
    }
    v(j - 1) = probe_sqnorm * quad;
  }
  return v;
}

namespace {

double slq_value_at(const CGTrace& trace, double probe_sqnorm, Index j) {
  const Index block = std::min<Index>(j, trace.iterations());
  const TridiagEig eig = eig_sym_tridiag(trace.tridiag.leading(block));
  double quad = 0.0;
  for (Index i = 0; i < block; ++i) {
    const double ritz = eig.eigenvalues(i);
    if (ritz <= 0.0) {
      throw NonPositiveRitzValue("slq: Ritz value " + std::to_string(ritz) +
                                 " at block size " + std::to_string(block));
    }
    quad += eig.first_components(i) * eig.first_components(i) * std::log(ritz);
  }
  return probe_sqnorm * quad;
}

}  // namespace

Vector slq_logdet(const std::vector<CGTrace>& traces, const ProbeSet& probes) {
  if (traces.size() != static_cast<size_t>(probes.count())) {
    throw DimensionMismatch("slq_logdet: one trace per probe required");
  }
  Index j_max = 0;
  for (const CGTrace& t : traces) j_max = std::max(j_max, t.iterations());
  const double sqnorm = static_cast<double>(probes.dim());

  Vector mean = Vector::Zero(j_max);
  for (const CGTrace& t : traces) {
    const Vector v = slq_prefix_values(t, sqnorm);
    for (Index j = 0; j < j_max; ++j) {
      // Converged traces hold their final value for larger blocks.
      mean(j) += v(std::min<Index>(j, v.size() - 1));
    }
  }
  return mean / static_cast<double>(traces.size());
}

Vector slq_logdet_at(const std::vector<CGTrace>& traces, const ProbeSet& probes,
                     const std::vector<Index>& js) {
  if (traces.size() != static_cast<size_t>(probes.count())) {
    throw DimensionMismatch("slq_logdet_at: one trace per probe required");
  }
  const double sqnorm = static_cast<double>(probes.dim());
  Vector mean = Vector::Zero(static_cast<Index>(js.size()));
  for (const CGTrace& t : traces) {
    for (size_t i = 0; i < js.size(); ++i) {
      mean(static_cast<Index>(i)) += slq_value_at(t, sqnorm, js[i]);
    }
  }
  return mean / static_cast<double>(traces.size());
}

MLLTerms cg_mll_estimate(const Dataset& data, const Hyperparams& theta,
                         const ProbeSet& probes, Index max_iter,
                         const Preconditioner& precond, double tol) {
  const Matrix k = kernel_matrix(data.x, theta, true);
  const LinearOperator op = LinearOperator::dense(k);

  Matrix rhs(data.size(), probes.count() + 1);
  rhs.col(0) = data.y;
  rhs.rightCols(probes.count()) = probes.probes;
  const MbcgResult solves = mbcg(op, rhs, precond, max_iter, tol);

  const Vector u = invquad_cg(solves.traces.front(), data.y);
  const double invquad = u.size() > 0 ? u(u.size() - 1) : 0.0;
  std::vector<CGTrace> probe_traces(solves.traces.begin() + 1,
                                    solves.traces.end());
  const Vector v = slq_logdet_at(probe_traces, probes, {max_iter});
  return MLLTerms::from_parts(v(0), invquad, data.size());
}

Vector stochastic_grad_cg(const Dataset& data, const Hyperparams& theta,
                          const ProbeSet& probes, Index max_iter,
                          const Preconditioner& precond, double tol) {
  const Matrix k = kernel_matrix(data.x, theta, true);
  const LinearOperator op = LinearOperator::dense(k);

  Matrix rhs(data.size(), probes.count() + 1);
  rhs.col(0) = data.y;
  rhs.rightCols(probes.count()) = probes.probes;
  const MbcgResult solves = mbcg(op, rhs, precond, max_iter, tol);
  const Vector y_solve = solves.solutions.col(0);

  Vector grad(theta.param_count());
  for (Index p = 0; p < grad.size(); ++p) {
    const Matrix dk = kernel_grad(data.x, theta, param_at(theta, p));
    double trace_est = 0.0;
    for (Index i = 0; i < probes.count(); ++i) {
      trace_est += solves.solutions.col(i + 1).dot(dk * probes.probes.col(i));
    }
    trace_est /= static_cast<double>(probes.count());
    const double quad = y_solve.dot(dk * y_solve);
    grad(p) = 0.5 * (trace_est - quad);
  }
  return grad;
}

}  // namespace rtgp
