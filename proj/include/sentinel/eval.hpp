#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sentinel/error.hpp"

namespace sentinel {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  std::int64_t false_positives = 0;
  std::int64_t true_positives = 0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

/// Sweeps the threshold down through the distinct scores; tied scores enter
/// together, so each distinct value adds exactly one point.
inline RocCurve roc_curve(std::span<const double> scores, const std::vector<bool>& labels) {
  require_dims(labels.size(), scores.size(), "roc_curve labels");
  RocCurve curve;
  for (bool l : labels) (l ? curve.positives : curve.negatives) += 1;
  if (curve.positives == 0 || curve.negatives == 0) {
    throw Error(ErrorKind::DegenerateLabels, "need at least one attack and one legitimate window");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  curve.points.push_back({0.0, 0.0, 0, 0});
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  const auto p = static_cast<double>(curve.positives);
  const auto n = static_cast<double>(curve.negatives);
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      (labels[order[k]] ? tp : fp) += 1;
      ++k;
    }
    curve.points.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / p, fp, tp});
  }
  return curve;
}

// Trapezoid area kept in integer units of 1 / (2 P N) until the final divide,
// which makes it identical to the Mann-Whitney statistic with half-credit ties.
inline double auc(const RocCurve& curve) {
  std::int64_t twice_area = 0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    twice_area += (b.false_positives - a.false_positives) * (b.true_positives + a.true_positives);
  }
  return static_cast<double>(twice_area) / (2.0 * static_cast<double>(curve.positives) *
                                            static_cast<double>(curve.negatives));
}

inline double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  return auc(roc_curve(scores, labels));
}

/// TPR of the rightmost point whose FPR does not exceed the request.
inline double tpr_at_fpr(const RocCurve& curve, double fpr) {
  if (!(fpr >= 0.0 && fpr <= 1.0)) throw Error(ErrorKind::Config, "fpr must be in [0, 1]");
  const auto allowed = static_cast<std::int64_t>(std::floor(fpr * static_cast<double>(curve.negatives) + 1e-9));
  double best = 0.0;
  for (const auto& pt : curve.points) {
    if (pt.false_positives <= allowed) best = std::max(best, pt.tpr);
  }
  return best;
}

inline double tpr_at_fpr(std::span<const double> scores, const std::vector<bool>& labels, double fpr) {
  return tpr_at_fpr(roc_curve(scores, labels), fpr);
}

struct DetectorResult {
  std::string detector;
  RocCurve roc;
  double auc = 0.0;
  std::vector<double> tpr_at;  // aligned with EvalReport::fpr_list
};

struct ScenarioResult {
  std::string scenario;
  std::vector<DetectorResult> detectors;
};

struct EvalReport {
  std::vector<double> fpr_list{0.01, 0.05, 0.1};
  std::vector<ScenarioResult> scenarios;
};

inline DetectorResult evaluate_detector(std::string name, std::span<const double> scores, const std::vector<bool>& labels,
                                        std::span<const double> fpr_list) {
  DetectorResult r;
  r.detector = std::move(name);
  r.roc = roc_curve(scores, labels);
  r.auc = auc(r.roc);
  for (double f : fpr_list) r.tpr_at.push_back(tpr_at_fpr(r.roc, f));
  return r;
}

namespace detail {

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fpr_label(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", f);
  return buf;
}

}  // namespace detail

/// Per-scenario ROC table: detector,fpr,tpr
inline void write_roc_csv(std::ostream& out, const ScenarioResult& scenario) {
  out << "detector,fpr,tpr\n";
  for (const auto& d : scenario.detectors) {
    for (const auto& pt : d.roc.points) {
      out << d.detector << ',' << detail::fixed(pt.fpr) << ',' << detail::fixed(pt.tpr) << '\n';
    }
  }
}

inline void write_summary_csv(std::ostream& out, const EvalReport& report) {
  out << "scenario,detector,auc";
  for (double f : report.fpr_list) out << ",tpr@" << detail::fpr_label(f);
  out << ",n_attack,n_legit\n";
  for (const auto& s : report.scenarios) {
    for (const auto& d : s.detectors) {
      out << s.scenario << ',' << d.detector << ',' << detail::fixed(d.auc);
      for (double t : d.tpr_at) out << ',' << detail::fixed(t);
      out << ',' << d.roc.positives << ',' << d.roc.negatives << '\n';
    }
  }
}

/// Self-contained SVG: unit square axes, one polyline per detector, legend
/// with AUC to two decimals.
inline void write_roc_svg(std::ostream& out, const ScenarioResult& scenario) {
  constexpr double kSize = 400.0;
  constexpr double kMargin = 50.0;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto px = [&](double x) { return kMargin + x * kSize; };
  auto py = [&](double y) { return kMargin + (1.0 - y) * kSize; };
  const double w = kSize + 2 * kMargin + 140;
  const double h = kSize + 2 * kMargin;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\">\n";
  out << "<title>ROC " << scenario.scenario << "</title>\n";
  out << "<rect x=\"" << px(0) << "\" y=\"" << py(1) << "\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
      << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n";
  for (int t = 0; t <= 10; t += 2) {
    const double v = t / 10.0;
    out << "<text x=\"" << px(v) << "\" y=\"" << py(0) + 18 << "\" font-size=\"11\" text-anchor=\"middle\">"
        << detail::fixed(v, 1) << "</text>\n";
    out << "<text x=\"" << px(0) - 8 << "\" y=\"" << py(v) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
        << detail::fixed(v, 1) << "</text>\n";
  }
  out << "<text x=\"" << px(0.5) << "\" y=\"" << h - 8 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << "False positive rate</text>\n";
  out << "<text x=\"14\" y=\"" << py(0.5) << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << py(0.5) << ")\">True positive rate</text>\n";

  for (std::size_t k = 0; k < scenario.detectors.size(); ++k) {
    const auto& d = scenario.detectors[k];
    const char* color = kColors[k % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& pt : d.roc.points) out << detail::fixed(px(pt.fpr), 2) << ',' << detail::fixed(py(pt.tpr), 2) << ' ';
    out << "\"/>\n";
    const double ly = kMargin + 20.0 * static_cast<double>(k + 1);
    out << "<line x1=\"" << px(1) + 15 << "\" y1=\"" << ly - 4 << "\" x2=\"" << px(1) + 35 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << px(1) + 40 << "\" y=\"" << ly << "\" font-size=\"12\">" << d.detector << " (AUC "
        << detail::fixed(d.auc, 2) << ")</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace sentinel
