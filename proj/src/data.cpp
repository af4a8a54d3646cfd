#include "rtgp/data.hpp"

#include <cmath>

#include "rtgp/csv.hpp"

namespace rtgp {

Vector sample_gp_prior(const Matrix& x, const Hyperparams& theta, Rng& rng) {
  const Index n = x.rows();
  const Matrix k = kernel_matrix(x, theta, false);
  const Matrix l = cholesky_factor(k, 1e-10);
  Vector eps(n), eps_noise(n);
  for (Index i = 0; i < n; ++i) eps(i) = rng.normal();
  for (Index i = 0; i < n; ++i) eps_noise(i) = rng.normal();
  return l * eps + std::sqrt(theta.noise_sq) * eps_noise;
}

Dataset gen_toy_sine(Index n, double noise_sd, Rng& rng) {
  if (n < 2) throw DimensionMismatch("gen_toy_sine: need N >= 2");
  Dataset data;
  data.x.resize(n, 1);
  data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n - 1);
    data.x(i, 0) = x;
    data.y(i) = x * std::sin(5.0 * 3.14159265358979323846 * x) +
                noise_sd * rng.normal();
  }
  return data;
}

Dataset gen_gp_dataset(Index n, Index d, const Hyperparams& theta, Rng& rng) {
  Dataset data;
  data.x.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) data.x(i, k) = rng.uniform();
  }
  data.y = sample_gp_prior(data.x, theta, rng);
  return data;
}

Dataset load_csv(const std::string& path, const std::string& target_column,
                 bool standardize) {
  const CsvTable table = read_csv(path);
  if (table.rows.empty()) throw EmptyData("load_csv: no data rows in " + path);
  const std::size_t target = table.column_index(target_column);
  const Index n = static_cast<Index>(table.rows.size());
  const Index d = static_cast<Index>(table.header.size()) - 1;
  if (d < 1) throw EmptyData("load_csv: need at least one feature column");

  Dataset data;
  data.x.resize(n, d);
  data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<size_t>(i)];
    Index k = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == target) {
        data.y(i) = row[c];
      } else {
        data.x(i, k++) = row[c];
      }
    }
  }

  if (standardize) {
    Standardization s;
    s.feature_means = data.x.colwise().mean();
    s.feature_scales.resize(d);
    for (Index k = 0; k < d; ++k) {
      const double var =
          (data.x.col(k).array() - s.feature_means(k)).square().sum() /
          static_cast<double>(n);
      s.feature_scales(k) = var > 0.0 ? std::sqrt(var) : 1.0;
      data.x.col(k) =
          (data.x.col(k).array() - s.feature_means(k)) / s.feature_scales(k);
    }
    s.target_mean = data.y.mean();
    const double yvar =
        (data.y.array() - s.target_mean).square().sum() / static_cast<double>(n);
    s.target_scale = yvar > 0.0 ? std::sqrt(yvar) : 1.0;
    data.y = (data.y.array() - s.target_mean) / s.target_scale;
    data.standardization = s;
  }
  return data;
}

Vector unstandardize_target(const Dataset& data, const Vector& y) {
  if (!data.standardization) return y;
  return (y.array() * data.standardization->target_scale +
          data.standardization->target_mean)
      .matrix();
}

}  // namespace rtgp
