#include "rtgp/kernels.hpp"

#include <cmath>

namespace rtgp {

void Hyperparams::validate(Index d) const {
  if (!(outputscale_sq > 0.0) || !std::isfinite(outputscale_sq)) {
    throw NonPositiveParam("outputscale_sq must be positive and finite");
  }
  if (!(noise_sq > 0.0) || !std::isfinite(noise_sq)) {
    throw NonPositiveParam("noise_sq must be positive and finite");
  }
  if (lengthscales.size() != 1 && lengthscales.size() != d) {
    throw DimensionMismatch("lengthscales must have length 1 or d");
  }
  for (Index k = 0; k < lengthscales.size(); ++k) {
    if (!(lengthscales(k) > 0.0) || !std::isfinite(lengthscales(k))) {
      throw NonPositiveParam("lengthscales must be positive and finite");
    }
  }
}

ParamRef param_at(const Hyperparams& theta, Index flat_index) {
  const Index l = theta.lengthscales.size();
  if (flat_index == 0) return {ParamRef::Kind::outputscale_sq, 0};
  if (flat_index <= l) return {ParamRef::Kind::lengthscale, flat_index - 1};
  if (flat_index == l + 1) return {ParamRef::Kind::noise_sq, 0};
  throw UnknownParam("parameter index out of range");
}

Vector params_to_vector(const Hyperparams& theta) {
  Vector v(theta.param_count());
  v(0) = theta.outputscale_sq;
  v.segment(1, theta.lengthscales.size()) = theta.lengthscales;
  v(v.size() - 1) = theta.noise_sq;
  return v;
}

Hyperparams params_from_vector(const Vector& v, Index lengthscale_count) {
  if (v.size() != lengthscale_count + 2) {
    throw DimensionMismatch("parameter vector has wrong length");
  }
  Hyperparams theta;
  theta.outputscale_sq = v(0);
  theta.lengthscales = v.segment(1, lengthscale_count);
  theta.noise_sq = v(v.size() - 1);
  return theta;
}

namespace {

// Inputs scaled by 1/ℓ per dimension, after which the kernel exponent is
// −½‖u−u′‖².
Matrix scaled_inputs(const Matrix& x, const Hyperparams& theta) {
  Matrix u = x;
  for (Index k = 0; k < x.cols(); ++k) {
    u.col(k) /= theta.lengthscale_for_dim(k);
  }
  return u;
}

Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) {
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Matrix d = -2.0 * a * b.transpose();
  d.colwise() += an;
  d.rowwise() += bn.transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

Matrix kernel_matrix(const Matrix& x, const Hyperparams& theta,
                     bool include_noise) {
  theta.validate(x.cols());
  const Index n = x.rows();
  const Matrix u = scaled_inputs(x, theta);

  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = theta.outputscale_sq;
    for (Index j = i + 1; j < n; ++j) {
      const double sq = (u.row(i) - u.row(j)).squaredNorm();
      const double v = theta.outputscale_sq * std::exp(-0.5 * sq);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  if (include_noise) k.diagonal().array() += theta.noise_sq;
  return k;
}

Matrix kernel_grad(const Matrix& x, const Hyperparams& theta,
                   const ParamRef& param) {
  theta.validate(x.cols());
  const Index n = x.rows();
  switch (param.kind) {
    case ParamRef::Kind::noise_sq:
      return Matrix::Identity(n, n);
    case ParamRef::Kind::outputscale_sq:
      return kernel_matrix(x, theta, false) / theta.outputscale_sq;
    case ParamRef::Kind::lengthscale: {
      const Index k = param.lengthscale_index;
      if (k < 0 || k >= theta.lengthscales.size()) {
        throw UnknownParam("lengthscale index out of range");
      }
      const Matrix base = kernel_matrix(x, theta, false);
      const double ell = theta.lengthscales(k);
      Matrix dist;
      if (theta.lengthscales.size() == 1) {
        dist = pairwise_sqdist(x, x);  // shared ℓ sees the full distance
      } else {
        dist = pairwise_sqdist(x.col(k), x.col(k));
      }
      return base.cwiseProduct(dist) / (ell * ell * ell);
    }
  }
  throw UnknownParam("unhandled parameter kind");
}

Matrix cross_kernel(const Matrix& xstar, const Matrix& x,
                    const Hyperparams& theta) {
  if (xstar.cols() != x.cols()) {
    throw DimensionMismatch("cross_kernel: dimension mismatch");
  }
  theta.validate(x.cols());
  const Matrix ustar = scaled_inputs(xstar, theta);
  const Matrix u = scaled_inputs(x, theta);
  return theta.outputscale_sq *
         (-0.5 * pairwise_sqdist(ustar, u)).array().exp().matrix();
}

}  // namespace rtgp
