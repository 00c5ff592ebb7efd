#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <list>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sentinel/error.hpp"
#include "sentinel/ingest.hpp"

namespace sentinel {

struct OcsvmParams {
  double nu = 0.05;
  double gamma = 0.0;  // <= 0 selects the "scale" heuristic
  double tolerance = 1e-4;
  std::int64_t max_iterations = 1'000'000;
  std::size_t cache_bytes = 64u << 20;
};

struct OcsvmModel {
  Eigen::MatrixXd support_vectors;  // one row per support vector
  Eigen::VectorXd alphas;
  double rho = 0.0;
  double gamma = 1.0;
  double nu = 0.05;
  Scaler scaler;

  std::size_t dim() const { return static_cast<std::size_t>(support_vectors.cols()); }

  double decision(const Eigen::VectorXd& x) const {
    require_dims(static_cast<std::size_t>(x.size()), dim(), "ocsvm decision");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
      sum += alphas(i) * std::exp(-gamma * (support_vectors.row(i).transpose() - x).squaredNorm());
    }
    return sum - rho;
  }
};

/// Positive outside the learned region.
inline double ocsvm_score(const OcsvmModel& model, const Eigen::VectorXd& x) { return -model.decision(x); }

inline double scale_gamma(const Eigen::MatrixXd& x) {
  if (x.rows() < 1 || x.cols() < 1) return 1.0;
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const double mean_var = centered.squaredNorm() / static_cast<double>(x.rows() * x.cols());
  return 1.0 / (static_cast<double>(x.cols()) * std::max(mean_var, 1e-8));
}

// RBF kernel columns with LRU eviction once the byte budget is spent.
class KernelCache {
 public:
  KernelCache(const Eigen::MatrixXd& x, double gamma, std::size_t cache_bytes)
      : x_(x), gamma_(gamma), sq_norms_(x.rowwise().squaredNorm()) {
    const std::size_t col_bytes = static_cast<std::size_t>(x.rows()) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, cache_bytes / std::max<std::size_t>(col_bytes, 1));
  }

  double diag() const { return 1.0; }

  const Eigen::VectorXd& column(Eigen::Index j) {
    auto it = cols_.find(j);
    if (it != cols_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.pos);
      return it->second.values;
    }
    if (cols_.size() >= capacity_) {
      cols_.erase(lru_.back());
      lru_.pop_back();
    }
    lru_.push_front(j);
    Eigen::VectorXd dots = x_ * x_.row(j).transpose();
    Eigen::VectorXd values(x_.rows());
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      values(i) = std::exp(-gamma_ * std::max(sq_norms_(i) + sq_norms_(j) - 2.0 * dots(i), 0.0));
    }
    values(j) = 1.0;
    auto& entry = cols_[j];
    entry.values = std::move(values);
    entry.pos = lru_.begin();
    return entry.values;
  }

  std::size_t capacity() const { return capacity_; }

 private:
  struct Entry {
    Eigen::VectorXd values;
    std::list<Eigen::Index>::iterator pos;
  };

  const Eigen::MatrixXd& x_;
  double gamma_;
  Eigen::VectorXd sq_norms_;
  std::size_t capacity_;
  std::list<Eigen::Index> lru_;
  std::unordered_map<Eigen::Index, Entry> cols_;
};

/// Full dual state after optimization; kept for diagnostics (KKT, objective).
struct OcsvmSolution {
  Eigen::VectorXd alpha;
  Eigen::VectorXd gradient;  // Q alpha
  double rho = 0.0;
  double upper = 0.0;        // box bound 1 / (nu n)
  std::int64_t iterations = 0;
};

// min 1/2 a^T Q a  s.t.  0 <= a_i <= 1/(nu n),  sum a = 1.
// Pairwise updates on the maximal violating pair; ties go to the lowest index.
inline OcsvmSolution solve_ocsvm_dual(const Eigen::MatrixXd& x, double nu, double gamma,
                                      const OcsvmParams& params = {}) {
  const Eigen::Index n = x.rows();
  OcsvmSolution sol;
  sol.upper = 1.0 / (nu * static_cast<double>(n));
  const double c = sol.upper;

  sol.alpha = Eigen::VectorXd::Zero(n);
  double remaining = 1.0;
  for (Eigen::Index i = 0; i < n && remaining > 0.0; ++i) {
    sol.alpha(i) = std::min(c, remaining);
    remaining -= sol.alpha(i);
  }

  KernelCache cache(x, gamma, params.cache_bytes);
  sol.gradient = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (sol.alpha(j) > 0.0) sol.gradient += sol.alpha(j) * cache.column(j);
  }

  const double bound_eps = 1e-12 * c;
  auto below_upper = [&](Eigen::Index t) { return sol.alpha(t) < c - bound_eps; };
  auto above_lower = [&](Eigen::Index t) { return sol.alpha(t) > bound_eps; };

  while (true) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (below_upper(t) && (i < 0 || sol.gradient(t) < sol.gradient(i))) i = t;
      if (above_lower(t) && (j < 0 || sol.gradient(t) > sol.gradient(j))) j = t;
    }
    if (i < 0 || j < 0 || sol.gradient(j) - sol.gradient(i) < params.tolerance) break;
    if (sol.iterations >= params.max_iterations) {
      throw Error(ErrorKind::NonConvergence, "SMO hit the iteration cap of " +
                                                 std::to_string(params.max_iterations));
    }
    ++sol.iterations;

    const Eigen::VectorXd& qi = cache.column(i);
    const Eigen::VectorXd qj = cache.column(j);
    double curvature = qi(i) + qj(j) - 2.0 * qi(j);
    if (curvature <= 0.0) curvature = 1e-12;
    // Move mass from j to i.
    double delta = (sol.gradient(j) - sol.gradient(i)) / curvature;
    delta = std::min({delta, c - sol.alpha(i), sol.alpha(j)});
    sol.alpha(i) += delta;
    sol.alpha(j) -= delta;
    sol.gradient += delta * (qi - qj);
  }

  // rho: average gradient over free variables, otherwise midpoint of the bounds.
  double free_sum = 0.0;
  std::int64_t free_count = 0;
  double lb = -std::numeric_limits<double>::infinity();
  double ub = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    if (!below_upper(t)) {
      lb = std::max(lb, sol.gradient(t));
    } else if (!above_lower(t)) {
      ub = std::min(ub, sol.gradient(t));
    } else {
      free_sum += sol.gradient(t);
      ++free_count;
    }
  }
  if (free_count > 0) {
    sol.rho = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(lb) && std::isfinite(ub)) {
    sol.rho = 0.5 * (lb + ub);
  } else {
    sol.rho = std::isfinite(lb) ? lb : ub;
  }
  return sol;
}

inline double ocsvm_dual_objective(const Eigen::VectorXd& alpha, const Eigen::VectorXd& gradient) {
  return 0.5 * alpha.dot(gradient);
}

// Per-point KKT violation given the gradient Q alpha and offset rho.
inline Eigen::VectorXd ocsvm_kkt_residuals(const OcsvmSolution& sol) {
  const Eigen::Index n = sol.alpha.size();
  const double eps = 1e-12 * sol.upper;
  Eigen::VectorXd r(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double f = sol.gradient(t) - sol.rho;
    if (sol.alpha(t) <= eps) {
      r(t) = std::max(0.0, -f);
    } else if (sol.alpha(t) >= sol.upper - eps) {
      r(t) = std::max(0.0, f);
    } else {
      r(t) = std::abs(f);
    }
  }
  return r;
}

/// Fits on scaled rows. Support vectors are the rows whose alpha exceeds a
/// relative tolerance of the box bound.
inline OcsvmModel fit_ocsvm(const Eigen::MatrixXd& x, const OcsvmParams& params = {}, Scaler scaler = {}) {
  if (x.rows() < 2) throw Error(ErrorKind::InsufficientData, "OCSVM needs at least 2 windows");
  if (!(params.nu > 0.0 && params.nu <= 1.0)) throw Error(ErrorKind::Config, "nu must be in (0, 1]");

  const double gamma = params.gamma > 0.0 ? params.gamma : scale_gamma(x);
  OcsvmSolution sol = solve_ocsvm_dual(x, params.nu, gamma, params);

  const double sv_eps = 1e-12 * sol.upper;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    if (sol.alpha(t) > sv_eps) sv.push_back(t);
  }
  OcsvmModel model;
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.alphas.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    model.support_vectors.row(static_cast<Eigen::Index>(r)) = x.row(sv[r]);
    model.alphas(static_cast<Eigen::Index>(r)) = sol.alpha(sv[r]);
  }
  model.rho = sol.rho;
  model.gamma = gamma;
  model.nu = params.nu;
  model.scaler = std::move(scaler);
  return model;
}

}  // namespace sentinel
