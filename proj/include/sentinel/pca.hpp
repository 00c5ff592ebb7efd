#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "sentinel/error.hpp"
#include "sentinel/ingest.hpp"

namespace sentinel {

// Probabilistic PCA: N(mean, W diag(lambda_1..k - s2) W^T + s2 I), where s2 is
// the mean of the discarded eigenvalues. Along a retained direction the model
// variance is lambda_j, along every orthogonal direction it is s2.
struct PcaDensityModel {
  static constexpr double kSigma2Floor = 1e-9;

  Eigen::VectorXd mean;
  Eigen::MatrixXd components;   // d x k, orthonormal columns
  Eigen::VectorXd eigenvalues;  // all d, descending
  std::size_t k = 0;
  double sigma2 = kSigma2Floor;
  Scaler scaler;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }

  // Variance used along retained component j.
  double component_variance(std::size_t j) const {
    return std::max(eigenvalues(static_cast<Eigen::Index>(j)), sigma2);
  }

  double log_det_covariance() const {
    double logdet = 0.0;
    for (std::size_t j = 0; j < k; ++j) logdet += std::log(component_variance(j));
    return logdet + static_cast<double>(dim() - k) * std::log(sigma2);
  }

  /// Dense covariance the model defines; for diagnostics and tests.
  Eigen::MatrixXd covariance() const {
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd extra(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) extra(static_cast<Eigen::Index>(j)) = component_variance(j) - sigma2;
    return components * extra.asDiagonal() * components.transpose() +
           sigma2 * Eigen::MatrixXd::Identity(d, d);
  }
};

/// Fits on already-scaled rows. Eigenvectors are sign-normalized so the
/// largest-magnitude entry of each is positive.
inline PcaDensityModel fit_pca(const Eigen::MatrixXd& x, std::size_t k, Scaler scaler = {}) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (n < 2) throw Error(ErrorKind::InsufficientData, "PCA needs at least 2 windows");
  if (k < 1 || k > static_cast<std::size_t>(d)) {
    throw Error(ErrorKind::BadRank, "k=" + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");
  }

  PcaDensityModel model;
  model.k = k;
  model.scaler = std::move(scaler);
  model.mean = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::EigenFailure, "eigendecomposition did not converge");

  // Eigen returns ascending order.
  model.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index c = 0; c < d; ++c) {
    Eigen::Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0) vectors.col(c) *= -1.0;
  }
  model.components = vectors.leftCols(static_cast<Eigen::Index>(k));

  if (k < static_cast<std::size_t>(d)) {
    model.sigma2 = model.eigenvalues.tail(d - static_cast<Eigen::Index>(k)).mean();
  }
  model.sigma2 = std::max(model.sigma2, PcaDensityModel::kSigma2Floor);
  return model;
}

/// Negative log-density of a scaled vector; higher is more anomalous.
inline double pca_score(const PcaDensityModel& model, const Eigen::VectorXd& x) {
  require_dims(static_cast<std::size_t>(x.size()), model.dim(), "pca_score");
  Eigen::VectorXd z = x - model.mean;
  Eigen::VectorXd proj = model.components.transpose() * z;
  double quad = 0.0;
  for (std::size_t j = 0; j < model.k; ++j) {
    const double p = proj(static_cast<Eigen::Index>(j));
    quad += p * p / model.component_variance(j);
  }
  // Direct norm; |z|^2 - |proj|^2 cancels badly once divided by a floored sigma2.
  const double residual = (z - model.components * proj).squaredNorm();
  quad += residual / model.sigma2;
  const double d = static_cast<double>(model.dim());
  return 0.5 * (d * std::log(2.0 * std::numbers::pi) + model.log_det_covariance() + quad);
}

/// Squared distance between x and its projection onto the retained subspace.
inline double reconstruction_error(const PcaDensityModel& model, const Eigen::VectorXd& x) {
  require_dims(static_cast<std::size_t>(x.size()), model.dim(), "reconstruction_error");
  Eigen::VectorXd z = x - model.mean;
  Eigen::VectorXd back = model.components * (model.components.transpose() * z);
  return (z - back).squaredNorm();
}

// Differential entropy of the model Gaussian; the expected score of a sample.
inline double pca_entropy(const PcaDensityModel& model) {
  const double d = static_cast<double>(model.dim());
  return 0.5 * (d * (1.0 + std::log(2.0 * std::numbers::pi)) + model.log_det_covariance());
}

/// Cumulative share of variance captured by the first j components, j = 1..d.
inline std::vector<double> explained_variance(const PcaDensityModel& model) {
  const auto d = model.eigenvalues.size();
  std::vector<double> ratios(static_cast<std::size_t>(d));
  const double total = model.eigenvalues.sum();
  double running = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    running += model.eigenvalues(j);
    ratios[static_cast<std::size_t>(j)] =
        total > 0.0 ? running / total : static_cast<double>(j + 1) / static_cast<double>(d);
  }
  if (!ratios.empty()) ratios.back() = 1.0;
  return ratios;
}

}  // namespace sentinel
