#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sentinel/error.hpp"
#include "sentinel/trace_model.hpp"

namespace sentinel {

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool is_syscall_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

[[noreturn]] inline void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorKind::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

// Reads lines, stripping a trailing CR. Returns false on EOF.
inline bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace detail

inline constexpr std::string_view kTraceHeader = "session_id,timestamp_ns,syscall";
inline constexpr std::string_view kLabelHeader = "session_id,start_ns,end_ns,kind";

/// Parses the trace CSV. Sessions may be interleaved in the file; the result is
/// grouped by ascending session id with each session in file order, which must
/// be non-decreasing in time.
inline std::vector<SyscallEvent> parse_trace(std::istream& in) {
  std::string line;
  if (!detail::next_line(in, line) || line.find_first_not_of(" \t") == std::string::npos) {
    throw Error(ErrorKind::EmptyInput, "trace has no header");
  }
  if (line != kTraceHeader) detail::malformed(1, "expected header '" + std::string(kTraceHeader) + "'");

  std::map<int, std::vector<SyscallEvent>> by_session;
  std::size_t line_no = 1;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv(line);
    if (fields.size() != 3) detail::malformed(line_no, "expected 3 fields");
    SyscallEvent ev;
    if (!detail::parse_int(fields[0], ev.session_id) || ev.session_id < 0) {
      detail::malformed(line_no, "bad session_id");
    }
    if (!detail::parse_int(fields[1], ev.timestamp_ns) || ev.timestamp_ns < 0) {
      detail::malformed(line_no, "bad timestamp_ns");
    }
    if (!detail::is_syscall_token(fields[2])) detail::malformed(line_no, "bad syscall name");
    ev.syscall = std::string(fields[2]);

    auto& session = by_session[ev.session_id];
    if (!session.empty() && ev.timestamp_ns < session.back().timestamp_ns) {
      throw Error(ErrorKind::NonMonotoneTimestamp,
                  "line " + std::to_string(line_no) + ": session " + std::to_string(ev.session_id) +
                      " goes back in time");
    }
    session.push_back(std::move(ev));
  }

  std::vector<SyscallEvent> events;
  for (auto& [id, session] : by_session) {
    for (auto& ev : session) events.push_back(std::move(ev));
  }
  return events;
}

inline std::vector<LabelSpan> parse_labels(std::istream& in) {
  std::vector<LabelSpan> spans;
  std::string line;
  if (!detail::next_line(in, line) || line.find_first_not_of(" \t") == std::string::npos) {
    return spans;
  }
  if (line != kLabelHeader) detail::malformed(1, "expected header '" + std::string(kLabelHeader) + "'");
  std::size_t line_no = 1;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv(line);
    if (fields.size() != 4) detail::malformed(line_no, "expected 4 fields");
    LabelSpan span;
    if (!detail::parse_int(fields[0], span.session_id) || span.session_id < 0) {
      detail::malformed(line_no, "bad session_id");
    }
    if (!detail::parse_int(fields[1], span.start_ns) || !detail::parse_int(fields[2], span.end_ns)) {
      detail::malformed(line_no, "bad interval bound");
    }
    if (!detail::is_syscall_token(fields[3])) detail::malformed(line_no, "bad kind");
    span.kind = std::string(fields[3]);
    if (span.start_ns >= span.end_ns) {
      throw Error(ErrorKind::InvalidSpan, "line " + std::to_string(line_no) + ": start >= end");
    }
    spans.push_back(std::move(span));
  }
  return spans;
}

inline void write_trace(std::ostream& out, std::span<const SyscallEvent> events) {
  out << kTraceHeader << '\n';
  for (const auto& e : events) out << e.session_id << ',' << e.timestamp_ns << ',' << e.syscall << '\n';
}

inline void write_labels(std::ostream& out, std::span<const LabelSpan> spans) {
  out << kLabelHeader << '\n';
  for (const auto& s : spans) {
    out << s.session_id << ',' << s.start_ns << ',' << s.end_ns << ',' << s.kind << '\n';
  }
}

/// Buckets each session's events into consecutive fixed-length windows starting
/// at t = 0. Every event is covered: a session whose last event is at time L
/// yields floor(L / interval) + 1 windows.
inline WindowedSeries windowize(std::span<const SyscallEvent> events,
                                std::shared_ptr<const SyscallVocabulary> vocab,
                                std::int64_t interval_ns, std::span<const LabelSpan> spans) {
  if (interval_ns <= 0) throw Error(ErrorKind::Config, "interval must be positive");
  WindowedSeries series{vocab, interval_ns, {}, {}};
  const std::size_t d = vocab->dim();

  std::map<int, std::vector<const SyscallEvent*>> by_session;
  for (const auto& e : events) by_session[e.session_id].push_back(&e);

  for (const auto& [session_id, evs] : by_session) {
    std::int64_t last = 0;
    for (const auto* e : evs) last = std::max(last, e->timestamp_ns);
    const std::int64_t n_windows = last / interval_ns + 1;
    const std::size_t base = series.windows.size();
    for (std::int64_t t = 0; t < n_windows; ++t) {
      series.windows.push_back({std::vector<std::int64_t>(d, 0), t, session_id});
      const std::int64_t lo = t * interval_ns;
      const std::int64_t hi = lo + interval_ns;
      bool attack = false;
      for (const auto& s : spans) {
        if (s.session_id == session_id && s.overlaps(lo, hi)) {
          attack = true;
          break;
        }
      }
      series.labels.push_back(attack);
    }
    for (const auto* e : evs) {
      auto t = static_cast<std::size_t>(e->timestamp_ns / interval_ns);
      series.windows[base + t].counts[vocab->index_of(e->syscall)] += 1;
    }
  }
  return series;
}

/// Debug dump: one row per window with the raw counts.
inline void write_series(std::ostream& out, const WindowedSeries& series) {
  out << "session_id,window_index,label";
  for (const auto& name : series.vocabulary->names()) out << ',' << name;
  out << ",OOV\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& w = series.windows[i];
    out << w.session_id << ',' << w.window_index << ',' << (series.labels[i] ? 1 : 0);
    for (auto c : w.counts) out << ',' << c;
    out << '\n';
  }
}

enum class ScalerKind { None, Standardize, MinMax };

inline std::string_view to_string(ScalerKind k) {
  switch (k) {
    case ScalerKind::None: return "none";
    case ScalerKind::Standardize: return "standardize";
    case ScalerKind::MinMax: return "minmax";
  }
  return "none";
}

inline ScalerKind scaler_kind_from_string(std::string_view s) {
  if (s == "none") return ScalerKind::None;
  if (s == "standardize") return ScalerKind::Standardize;
  if (s == "minmax") return ScalerKind::MinMax;
  throw Error(ErrorKind::ModelFormat, "unknown scaler kind '" + std::string(s) + "'");
}

// Per-dimension affine map x -> (x - offset) / scale.
struct Scaler {
  static constexpr double kFloor = 1e-8;

  ScalerKind kind = ScalerKind::None;
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  std::size_t dim() const { return static_cast<std::size_t>(offset.size()); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    require_dims(static_cast<std::size_t>(x.cols()), dim(), "scaler input");
    return (x.rowwise() - offset.transpose()).array().rowwise() / scale.transpose().array();
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    require_dims(static_cast<std::size_t>(x.size()), dim(), "scaler input");
    return (x - offset).cwiseQuotient(scale);
  }

  Eigen::VectorXd invert(const Eigen::VectorXd& s) const {
    require_dims(static_cast<std::size_t>(s.size()), dim(), "scaler input");
    return s.cwiseProduct(scale) + offset;
  }

  Eigen::MatrixXd invert(const Eigen::MatrixXd& s) const {
    require_dims(static_cast<std::size_t>(s.cols()), dim(), "scaler input");
    return (s.array().rowwise() * scale.transpose().array()).matrix().rowwise() + offset.transpose();
  }
};

inline Scaler fit_scaler(const Eigen::MatrixXd& x, ScalerKind kind) {
  const auto d = x.cols();
  const auto n = x.rows();
  Scaler s{kind, Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
  switch (kind) {
    case ScalerKind::None:
      break;
    case ScalerKind::Standardize: {
      if (n < 2) throw Error(ErrorKind::InsufficientData, "standardize needs at least 2 windows");
      s.offset = x.colwise().mean().transpose();
      Eigen::MatrixXd centered = x.rowwise() - s.offset.transpose();
      Eigen::VectorXd var = centered.colwise().squaredNorm().transpose() / static_cast<double>(n - 1);
      s.scale = var.cwiseSqrt().cwiseMax(Scaler::kFloor);
      break;
    }
    case ScalerKind::MinMax: {
      if (n < 1) throw Error(ErrorKind::InsufficientData, "minmax needs at least 1 window");
      s.offset = x.colwise().minCoeff().transpose();
      s.scale = (x.colwise().maxCoeff().transpose() - s.offset).cwiseMax(Scaler::kFloor);
      break;
    }
  }
  return s;
}

inline Scaler fit_scaler(const WindowedSeries& training, ScalerKind kind) {
  return fit_scaler(training.to_matrix(), kind);
}

inline Eigen::MatrixXd apply_scaler(const Scaler& scaler, const WindowedSeries& series) {
  return scaler.apply(series.to_matrix());
}

/// Smoothed inverse document frequency with windows as documents:
/// w_i = ln((1 + N) / (1 + n_i)) + 1, n_i = windows where dimension i is non-zero.
struct IdfWeights {
  Eigen::VectorXd weights;
  std::int64_t num_training_windows = 0;

  std::size_t dim() const { return static_cast<std::size_t>(weights.size()); }

  static IdfWeights uniform(std::size_t d) {
    return {Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d)), 0};
  }
};

inline IdfWeights compute_idf_weights(const WindowedSeries& training) {
  const std::size_t n = training.size();
  if (n < 1) throw Error(ErrorKind::InsufficientData, "IDF needs at least one training window");
  const std::size_t d = training.dim();
  std::vector<std::int64_t> doc_freq(d, 0);
  for (const auto& w : training.windows) {
    for (std::size_t i = 0; i < d; ++i) doc_freq[i] += w.counts[i] > 0 ? 1 : 0;
  }
  IdfWeights idf{Eigen::VectorXd(static_cast<Eigen::Index>(d)), static_cast<std::int64_t>(n)};
  const double big_n = static_cast<double>(n);
  for (std::size_t i = 0; i < d; ++i) {
    idf.weights(static_cast<Eigen::Index>(i)) =
        std::log((1.0 + big_n) / (1.0 + static_cast<double>(doc_freq[i]))) + 1.0;
  }
  return idf;
}

}  // namespace sentinel
