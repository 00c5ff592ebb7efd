#pragma once

// Slow, obviously-correct reference computations. Nothing here calls into the
// library's algorithms; tests compare the two.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sentinel/random.hpp"
#include "sentinel/trace_model.hpp"

namespace oracle {

using sentinel::LabelSpan;
using sentinel::SyscallEvent;

// Count of each name per (session, window index), by direct recount.
inline std::map<std::pair<int, std::int64_t>, std::map<std::string, std::int64_t>> recount(
    const std::vector<SyscallEvent>& events, std::int64_t interval) {
  std::map<std::pair<int, std::int64_t>, std::map<std::string, std::int64_t>> out;
  for (const auto& e : events) out[{e.session_id, e.timestamp_ns / interval}][e.syscall] += 1;
  return out;
}

// Interval arithmetic: [lo, hi) meets [s, e) iff max(lo, s) < min(hi, e).
inline bool window_is_attack(const std::vector<LabelSpan>& spans, int session, std::int64_t lo, std::int64_t hi) {
  for (const auto& s : spans) {
    if (s.session_id == session && std::max(lo, s.start_ns) < std::min(hi, s.end_ns)) return true;
  }
  return false;
}

// Mann-Whitney: share of (attack, legit) pairs ranked correctly, ties 1/2.
inline double mann_whitney(const std::vector<double>& scores, const std::vector<bool>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (!labels[a]) continue;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      if (labels[b]) continue;
      pairs += 1.0;
      if (scores[a] > scores[b]) wins += 1.0;
      else if (scores[a] == scores[b]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Sample covariance with 1/(n-1), by explicit loops.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x, Eigen::VectorXd* mean_out = nullptr) {
  const auto n = x.rows();
  const auto d = x.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) mean(c) += x(r, c);
  }
  mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = 0; b < d; ++b) cov(a, b) += (x(r, a) - mean(a)) * (x(r, b) - mean(b));
    }
  }
  if (mean_out) *mean_out = mean;
  return cov / static_cast<double>(n - 1);
}

// Leading eigenpair by power iteration.
inline std::pair<double, Eigen::VectorXd> top_eigenpair(const Eigen::MatrixXd& s) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(s.rows()).normalized();
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd next = (s * v).normalized();
    if ((next - v).norm() < 1e-15) {
      v = next;
      break;
    }
    v = next;
  }
  return {v.dot(s * v), v};
}

// 2x2 and 3x3 inverse/determinant by cofactors.
inline double det(const Eigen::MatrixXd& m) {
  if (m.rows() == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

inline Eigen::MatrixXd inverse(const Eigen::MatrixXd& m) {
  const double dt = det(m);
  Eigen::MatrixXd inv(m.rows(), m.cols());
  if (m.rows() == 2) {
    inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return inv / dt;
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const int r1 = (c + 1) % 3, r2 = (c + 2) % 3, c1 = (r + 1) % 3, c2 = (r + 2) % 3;
      inv(r, c) = (m(r1, c1) * m(r2, c2) - m(r1, c2) * m(r2, c1)) / dt;
    }
  }
  return inv;
}

inline double mvn_neg_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd z = x - mean;
  const double quad = z.dot(inverse(cov) * z);
  return 0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + std::log(det(cov)) + quad);
}

// Dual objective 1/2 a^T K a for an RBF kernel.
inline double rbf(const Eigen::MatrixXd& x, Eigen::Index i, Eigen::Index j, double gamma) {
  return std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& x, double gamma) {
  Eigen::MatrixXd k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.rows(); ++j) k(i, j) = rbf(x, i, j, gamma);
  }
  return k;
}

// Exhaustive minimum of 1/2 a^T K a over {a : a_i in steps of 1/grid, a_i <= cap, sum a = 1},
// then polished by pairwise mass transfers with shrinking step (compass search).
inline double ocsvm_dual_min(const Eigen::MatrixXd& k, double cap, int grid) {
  const int n = static_cast<int>(k.rows());
  const int cap_units = static_cast<int>(std::floor(cap * grid + 1e-9));
  std::vector<int> units(static_cast<std::size_t>(n), 0);
  std::vector<int> best_units;
  double best = std::numeric_limits<double>::infinity();
  auto objective = [&](const Eigen::VectorXd& a) { return 0.5 * a.dot(k * a); };

  // Enumerate compositions of `grid` into n bounded parts.
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == n - 1) {
      if (left > cap_units) return;
      units[static_cast<std::size_t>(pos)] = left;
      Eigen::VectorXd a(n);
      for (int i = 0; i < n; ++i) a(i) = units[static_cast<std::size_t>(i)] / static_cast<double>(grid);
      const double f = objective(a);
      if (f < best) {
        best = f;
        best_units = units;
      }
      return;
    }
    for (int u = 0; u <= std::min(left, cap_units); ++u) {
      units[static_cast<std::size_t>(pos)] = u;
      self(self, pos + 1, left - u);
    }
  };
  rec(rec, 0, grid);

  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) a(i) = best_units[static_cast<std::size_t>(i)] / static_cast<double>(grid);
  double f = best;
  for (double step = 1.0 / grid; step > 1e-10; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          const double move = std::min({step, cap - a(i), a(j)});
          if (move <= 0.0) continue;
          a(i) += move;
          a(j) -= move;
          const double g = objective(a);
          if (g < f - 1e-15) {
            f = g;
            improved = true;
          } else {
            a(i) -= move;
            a(j) += move;
          }
        }
      }
    }
  }
  return f;
}

// Reference LSTM cell, one sample, written out scalar by scalar.
struct TinyLstm {
  // Gate order i, f, g, o; each W is h x d, U is h x h, b is h.
  std::vector<Eigen::MatrixXd> w, u;
  std::vector<Eigen::VectorXd> b;
  Eigen::MatrixXd v;   // d x h
  Eigen::VectorXd c0;  // d

  Eigen::VectorXd run(const std::vector<Eigen::VectorXd>& xs) const {
    const auto h = b[0].size();
    Eigen::VectorXd hs = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(h);
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    for (const auto& x : xs) {
      Eigen::VectorXd hn(h), cn(h);
      for (Eigen::Index k = 0; k < h; ++k) {
        double pre[4];
        for (int gate = 0; gate < 4; ++gate) {
          double z = b[static_cast<std::size_t>(gate)](k);
          for (Eigen::Index j = 0; j < x.size(); ++j) z += w[static_cast<std::size_t>(gate)](k, j) * x(j);
          for (Eigen::Index j = 0; j < h; ++j) z += u[static_cast<std::size_t>(gate)](k, j) * hs(j);
          pre[gate] = z;
        }
        const double ig = sig(pre[0]), fg = sig(pre[1]), gg = std::tanh(pre[2]), og = sig(pre[3]);
        cn(k) = fg * cs(k) + ig * gg;
        hn(k) = og * std::tanh(cn(k));
      }
      hs = hn;
      cs = cn;
    }
    return v * hs + c0;
  }
};

}  // namespace oracle
