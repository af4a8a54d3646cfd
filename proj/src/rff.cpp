#include "rtgp/rff.hpp"

#include <cmath>

namespace rtgp {

Matrix RFFFeatures::omega_at(const Hyperparams& theta) const {
  Matrix w = base_normals;
  for (Index k = 0; k < w.cols(); ++k) {
    w.col(k) /= theta.lengthscale_for_dim(k);
  }
  return w;
}

RFFFeatures sample_features(const Hyperparams& theta, Index d, Index j,
                            Rng& rng) {
  if (j < 2 || j % 2 != 0) {
    throw OddFeatureCount("sample_features: J must be even and >= 2");
  }
  theta.validate(d);
  RFFFeatures f;
  f.seed = rng.seed();
  f.theta_at_draw = theta;
  f.base_normals.resize(j / 2, d);
  // Row-major draw order keeps every prefix of rows a valid smaller draw.
  for (Index i = 0; i < j / 2; ++i) {
    for (Index k = 0; k < d; ++k) f.base_normals(i, k) = rng.normal();
  }
  f.omega = f.omega_at(theta);
  return f;
}

FeatureMatrix feature_map_at(const Matrix& x, const RFFFeatures& features,
                             const Hyperparams& theta, Index m) {
  if (m < 1 || m > features.pair_count()) {
    throw PrefixOutOfRange("feature_map: prefix must be in [1, J/2]");
  }
  const Matrix omega = features.omega_at(theta).topRows(m);
  const Matrix t = x * omega.transpose();  // N×m projections

  FeatureMatrix out;
  out.scale = std::sqrt(theta.outputscale_sq / static_cast<double>(m));
  out.phi.resize(x.rows(), 2 * m);
  for (Index i = 0; i < m; ++i) {
    out.phi.col(2 * i) = out.scale * t.col(i).array().cos().matrix();
    out.phi.col(2 * i + 1) = out.scale * t.col(i).array().sin().matrix();
  }
  return out;
}

FeatureMatrix feature_map(const Matrix& x, const RFFFeatures& features,
                          Index m) {
  return feature_map_at(x, features, features.theta_at_draw, m);
}

MLLTerms mll_rff(const FeatureMatrix& phi, const Vector& y, double noise_sq) {
  if (noise_sq <= 0.0) throw NonPositiveParam("mll_rff: noise_sq must be > 0");
  if (phi.phi.rows() != y.size()) {
    throw DimensionMismatch("mll_rff: Φ rows must match y");
  }
  const Index n = y.size();
  const Index j = phi.feature_count();

  Matrix inner = phi.phi.transpose() * phi.phi;
  inner.diagonal().array() += noise_sq;
  Matrix inner_chol;
  try {
    inner_chol = cholesky_factor(inner);
  } catch (const NotPositiveDefinite& e) {
    throw InnerNotPositiveDefinite(e.what());
  }

  const Vector w = phi.phi.transpose() * y;
  const double invquad =
      (y.squaredNorm() - w.dot(solve_posdef(inner_chol, w))) / noise_sq;
  const double logdet = logdet_from_chol(inner_chol) -
                        static_cast<double>(j - n) * std::log(noise_sq);
  return MLLTerms::from_parts(logdet, invquad, n);
}

namespace {

// ∂Φ/∂θ for one raw parameter over frozen base normals.
Matrix feature_grad(const Matrix& x, const RFFFeatures& features,
                    const Hyperparams& theta, Index m, const FeatureMatrix& phi,
                    const ParamRef& param) {
  const Index n = x.rows();
  const Index j = 2 * m;
  switch (param.kind) {
    case ParamRef::Kind::noise_sq:
      return Matrix::Zero(n, j);
    case ParamRef::Kind::outputscale_sq:
      return phi.phi / (2.0 * theta.outputscale_sq);
    case ParamRef::Kind::lengthscale: {
      const Index k = param.lengthscale_index;
      const Matrix omega = features.omega_at(theta).topRows(m);
      const Matrix t = x * omega.transpose();
      const double ell = theta.lengthscales(k);
      Matrix g(n, j);
      for (Index i = 0; i < m; ++i) {
        Vector dt;  // ∂(ωᵢᵀx)/∂ℓₖ
        if (theta.lengthscales.size() == 1) {
          dt = -t.col(i) / ell;  // shared ℓ scales the whole projection
        } else {
          dt = x.col(k) * (-omega(i, k) / ell);
        }
        g.col(2 * i) =
            -phi.scale * t.col(i).array().sin().matrix().cwiseProduct(dt);
        g.col(2 * i + 1) =
            phi.scale * t.col(i).array().cos().matrix().cwiseProduct(dt);
      }
      return g;
    }
  }
  throw UnknownParam("unhandled parameter kind");
}

}  // namespace

Vector grad_rff(const Dataset& data, const Hyperparams& theta,
                const RFFFeatures& features, Index m) {
  theta.validate(data.dim());
  const Index n = data.size();
  const FeatureMatrix phi = feature_map_at(data.x, features, theta, m);
  const Index j = phi.feature_count();

  Matrix inner = phi.phi.transpose() * phi.phi;
  inner.diagonal().array() += theta.noise_sq;
  Matrix inner_chol;
  try {
    inner_chol = cholesky_factor(inner);
  } catch (const NotPositiveDefinite& e) {
    throw InnerNotPositiveDefinite(e.what());
  }

  // a = K̃⁻¹y and W = K̃⁻¹Φ = ΦA⁻¹ via Woodbury.
  const Vector phity = phi.phi.transpose() * data.y;
  const Vector a =
      (data.y - phi.phi * solve_posdef(inner_chol, phity)) / theta.noise_sq;
  const Matrix w = phi.phi * solve_posdef(inner_chol, Matrix(Matrix::Identity(j, j)));
  const Vector phita = phi.phi.transpose() * a;

  Vector grad(theta.param_count());
  for (Index p = 0; p < grad.size(); ++p) {
    const ParamRef param = param_at(theta, p);
    if (param.kind == ParamRef::Kind::noise_sq) {
      const Matrix linv = inner_chol.triangularView<Eigen::Lower>().solve(
          Matrix::Identity(j, j));
      const double tr_kinv = (static_cast<double>(n - j) +
                              theta.noise_sq * linv.squaredNorm()) /
                             theta.noise_sq;
      grad(p) = 0.5 * (tr_kinv - a.squaredNorm());
    } else {
      const Matrix g = feature_grad(data.x, features, theta, m, phi, param);
      // ∂K̃/∂θ = GΦᵀ + ΦGᵀ
      const double trace_term = w.cwiseProduct(g).sum();
      const double quad_term = (g.transpose() * a).dot(phita);
      grad(p) = trace_term - quad_term;
    }
  }
  return grad;
}

}  // namespace rtgp
