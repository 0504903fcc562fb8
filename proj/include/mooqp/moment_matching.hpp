#pragma once

// Sample transformations that pin a sample's moments to known population
// values before the dual solve. Transformed entries may leave [0,1]; they are
// deliberately not clipped (clipping would undo the moment match), so the
// out-of-range fraction is reported instead.

#include <cmath>
#include <string>
#include <vector>

#include "mooqp/error.hpp"
#include "mooqp/types.hpp"

namespace mooqp {

struct PopulationMoments {
  Vector theta;      // population mean
  Matrix sigma_full; // population covariance
  int N = 0;         // population size
};

/// Population-style (1/n) covariance of the rows.
inline Matrix sample_cov(const Matrix& rows) {
  const Index n = rows.rows();
  if (n < 1) throw BadParams("sample_cov: empty sample");
  Vector mean = rows.colwise().mean().transpose();
  Matrix c = Matrix::Zero(rows.cols(), rows.cols());
  for (Index u = 0; u < n; ++u) {
    Vector d = rows.row(u).transpose() - mean;
    c += d * d.transpose();
  }
  return c / static_cast<double>(n);
}

inline PopulationMoments population_moments(const Matrix& rows) {
  PopulationMoments pop;
  pop.theta = rows.colwise().mean().transpose();
  pop.sigma_full = sample_cov(rows);
  pop.N = static_cast<int>(rows.rows());
  return pop;
}

struct TransformResult {
  Matrix rows;
  std::vector<std::string> warnings;
  double oob_fraction = 0.0;  // entries outside [0,1]
  bool fell_back = false;     // second-moment transform degraded to the shift
};

namespace detail {

inline double oob_fraction_of(const Matrix& rows) {
  Index bad = 0;
  for (Index u = 0; u < rows.rows(); ++u)
    for (Index i = 0; i < rows.cols(); ++i)
      if (rows(u, i) < 0.0 || rows(u, i) > 1.0) ++bad;
  return rows.size() == 0 ? 0.0 : static_cast<double>(bad) / static_cast<double>(rows.size());
}

inline void check_sample(const Matrix& sample, const PopulationMoments& pop, const char* where) {
  if (sample.rows() < 2) throw BadParams(std::string(where) + ": sample needs at least 2 rows");
  if (pop.theta.size() != sample.cols())
    throw DimensionMismatch(std::string(where) + ": population mean length");
}

// Symmetric PSD matrix power via eigendecomposition, eigenvalues clipped at
// 1e-12 from below before the power is applied.
inline Matrix sym_power(const Matrix& m, double power) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  Vector vals = eig.eigenvalues().cwiseMax(1e-12);
  for (Index i = 0; i < vals.size(); ++i) vals[i] = std::pow(vals[i], power);
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// First-moment match: every row is shifted by theta - sample mean, so the
/// output mean equals theta exactly.
inline TransformResult mm_additive(const Matrix& sample, const PopulationMoments& pop) {
  detail::check_sample(sample, pop, "mm_additive");
  Vector shift = pop.theta - sample.colwise().mean().transpose();
  TransformResult out;
  out.rows = sample.rowwise() + shift.transpose();
  out.oob_fraction = detail::oob_fraction_of(out.rows);
  return out;
}

/// Full moment match: deviations are rotated through the symmetric root pair
/// sigma_full^{1/2} sigma_sampled^{-1/2}, then recentred on theta, so the
/// output sample mean and covariance equal the population's. A numerically
/// singular sample covariance degrades to the additive shift with a warning.
inline TransformResult mm_full(const Matrix& sample, const PopulationMoments& pop) {
  detail::check_sample(sample, pop, "mm_full");
  if (pop.sigma_full.rows() != sample.cols() || pop.sigma_full.cols() != sample.cols())
    throw DimensionMismatch("mm_full: population covariance shape");
  Matrix sigma_sampled = sample_cov(sample);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_sampled);
  if (eig.eigenvalues().minCoeff() < 1e-12) {
    TransformResult out = mm_additive(sample, pop);
    out.fell_back = true;
    out.warnings.push_back("mm_full: sample covariance is singular; fell back to mm_additive");
    return out;
  }
  Matrix t = detail::sym_power(pop.sigma_full, 0.5) * detail::sym_power(sigma_sampled, -0.5);
  Vector mean = sample.colwise().mean().transpose();
  TransformResult out;
  out.rows.resize(sample.rows(), sample.cols());
  for (Index u = 0; u < sample.rows(); ++u)
    out.rows.row(u) = (pop.theta + t * (sample.row(u).transpose() - mean)).transpose();
  out.oob_fraction = detail::oob_fraction_of(out.rows);
  return out;
}

/// Product-form match: each coordinate is rescaled by theta / sample mean,
/// which matches the mean while keeping nonnegative samples nonnegative.
/// Coordinates whose sample mean is zero pass through with a warning.
inline TransformResult mm_product(const Matrix& sample, const PopulationMoments& pop) {
  detail::check_sample(sample, pop, "mm_product");
  Vector mean = sample.colwise().mean().transpose();
  Vector scale = Vector::Ones(sample.cols());
  TransformResult out;
  for (Index i = 0; i < sample.cols(); ++i) {
    if (mean[i] == 0.0)
      out.warnings.push_back("mm_product: sample mean is zero at coordinate " +
                             std::to_string(i) + "; passed through unscaled");
    else
      scale[i] = pop.theta[i] / mean[i];
  }
  out.rows = sample.array().rowwise() * scale.transpose().array();
  out.oob_fraction = detail::oob_fraction_of(out.rows);
  return out;
}

}  // namespace mooqp
