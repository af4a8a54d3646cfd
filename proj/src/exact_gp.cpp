#include "rtgp/exact_gp.hpp"

#include <cmath>

namespace rtgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

MLLTerms MLLTerms::from_parts(double logdet, double invquad, Index n) {
  MLLTerms t;
  t.logdet = logdet;
  t.invquad = invquad;
  t.total_nll = 0.5 * (logdet + invquad + static_cast<double>(n) * kLog2Pi);
  return t;
}

MLLTerms mll_exact(const Dataset& data, const Hyperparams& theta) {
  const Matrix k = kernel_matrix(data.x, theta, true);
  const Matrix l = cholesky_factor(k);
  const Vector alpha = l.triangularView<Eigen::Lower>().solve(data.y);
  return MLLTerms::from_parts(logdet_from_chol(l), alpha.squaredNorm(),
                              data.size());
}

Vector grad_exact(const Dataset& data, const Hyperparams& theta) {
  const Index n = data.size();
  const Matrix k = kernel_matrix(data.x, theta, true);
  const Matrix l = cholesky_factor(k);
  const Matrix kinv = solve_posdef(l, Matrix(Matrix::Identity(n, n)));
  const Vector a = solve_posdef(l, data.y);  // K̂⁻¹y

  Vector grad(theta.param_count());
  for (Index p = 0; p < grad.size(); ++p) {
    const Matrix dk = kernel_grad(data.x, theta, param_at(theta, p));
    const double trace_term = kinv.cwiseProduct(dk).sum();
    const double quad_term = a.dot(dk * a);
    grad(p) = 0.5 * (trace_term - quad_term);
  }
  return grad;
}

Posterior posterior_predict(const Dataset& data, const Hyperparams& theta,
                            const Matrix& xstar) {
  const Matrix k = kernel_matrix(data.x, theta, true);
  const Matrix l = cholesky_factor(k);
  const Matrix kstar = cross_kernel(xstar, data.x, theta);  // M×N

  Posterior post;
  post.mean = kstar * solve_posdef(l, data.y);

  // diag(K** − K*ᵀK̂⁻¹K*) + σ²; K** has o² on the diagonal.
  const Matrix v = l.triangularView<Eigen::Lower>().solve(
      Matrix(kstar.transpose()));  // N×M
  post.variance = Vector::Constant(xstar.rows(), theta.outputscale_sq) -
                  v.colwise().squaredNorm().transpose();
  post.variance.array() += theta.noise_sq;
  return post;
}

}  // namespace rtgp
