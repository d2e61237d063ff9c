#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace loganmeta::projection {

struct PowerIterationConfig {
  double tolerance = 1e-9;
  std::size_t max_iterations = 100'000;
  std::uint64_t seed = 0;
};

namespace detail {

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline std::vector<double> mat_vec(const std::vector<double>& m, std::size_t d,
                                   const std::vector<double>& v) {
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += m[i * d + j] * v[j];
    out[i] = s;
  }
  return out;
}

inline void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (const auto& b : basis) {
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * b[i];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * b[i];
  }
}

/// Dominant unit eigenvector of a symmetric PSD matrix, restricted to the
/// orthogonal complement of `basis`.
inline std::vector<double> dominant_direction(const std::vector<double>& cov, std::size_t d,
                                              const std::vector<std::vector<double>>& basis,
                                              const PowerIterationConfig& cfg, Rng& rng) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.normal();
  orthogonalize(v, basis);
  double n = norm(v);
  for (double& x : v) x /= n;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    auto w = mat_vec(cov, d, v);
    orthogonalize(w, basis);
    const double wn = norm(w);
    if (wn == 0.0) return v;  // remaining spectrum is zero; any direction works
    for (double& x : w) x /= wn;
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += w[i] * v[i];
    if (dot < 0.0)
      for (double& x : w) x = -x;
    double delta = 0.0;
    for (std::size_t i = 0; i < d; ++i) delta += (w[i] - v[i]) * (w[i] - v[i]);
    v = std::move(w);
    if (std::sqrt(delta) < cfg.tolerance) break;
  }
  return v;
}

}  // namespace detail

/// Centers the rows and projects them on the top two principal directions,
/// found by power iteration with deflation. The pair is then rotated within
/// its span (2x2 Rayleigh-Ritz) so column 0 carries at least the variance of
/// column 1.
inline Matrix project_2d(const Matrix& data, const PowerIterationConfig& cfg = {}) {
  const std::size_t n = data.rows(), d = data.cols();
  if (n < 2) throw Error(ErrorCode::DegenerateData, "projection needs at least two rows");
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += data(r, c);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  bool any = false;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      centered(r, c) = data(r, c) - mean[c];
      any = any || data(r, c) != data(0, c);
    }
  if (!any) throw Error(ErrorCode::DegenerateData, "all rows are identical");

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = centered.row(r);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += x[i] * x[j];
  }
  for (double& v : cov) v /= static_cast<double>(n - 1);

  Rng rng(cfg.seed);
  std::vector<std::vector<double>> basis;
  basis.push_back(detail::dominant_direction(cov, d, basis, cfg, rng));
  if (d > 1) basis.push_back(detail::dominant_direction(cov, d, basis, cfg, rng));

  // Rayleigh-Ritz on span(basis).
  if (basis.size() == 2) {
    const auto c0 = detail::mat_vec(cov, d, basis[0]);
    const auto c1 = detail::mat_vec(cov, d, basis[1]);
    double a = 0.0, b = 0.0, e = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      a += basis[0][i] * c0[i];
      b += basis[0][i] * c1[i];
      e += basis[1][i] * c1[i];
    }
    const double theta = 0.5 * std::atan2(2.0 * b, a - e);
    const double cs = std::cos(theta), sn = std::sin(theta);
    std::vector<double> u0(d), u1(d);
    for (std::size_t i = 0; i < d; ++i) {
      u0[i] = cs * basis[0][i] + sn * basis[1][i];
      u1[i] = -sn * basis[0][i] + cs * basis[1][i];
    }
    basis = {u0, u1};
  }

  Matrix out(n, 2);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = centered.row(r);
    for (std::size_t k = 0; k < basis.size(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += x[i] * basis[k][i];
      out(r, k) = s;
    }
  }
  return out;
}

}  // namespace loganmeta::projection
