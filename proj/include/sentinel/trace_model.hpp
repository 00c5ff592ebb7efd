#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sentinel/error.hpp"

namespace sentinel {

inline constexpr std::int64_t kNsPerMs = 1'000'000;
inline constexpr std::int64_t kNsPerSec = 1'000'000'000;

struct SyscallEvent {
  std::int64_t timestamp_ns = 0;
  std::string syscall;
  int session_id = 0;

  friend bool operator==(const SyscallEvent&, const SyscallEvent&) = default;
};

/// Ground-truth attack interval [start_ns, end_ns) within one session.
struct LabelSpan {
  int session_id = 0;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  std::string kind;

  bool overlaps(std::int64_t lo, std::int64_t hi) const { return lo < end_ns && start_ns < hi; }

  friend bool operator==(const LabelSpan&, const LabelSpan&) = default;
};

// Frozen name -> dimension map. Names are sorted; unknown names share the
// last dimension (OOV), so dim() == names.size() + 1.
class SyscallVocabulary {
 public:
  SyscallVocabulary() = default;

  explicit SyscallVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
    std::sort(names_.begin(), names_.end());
    names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
    for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], i);
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t oov_index() const { return names_.size(); }
  std::size_t dim() const { return names_.size() + 1; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? oov_index() : it->second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  // FNV-1a over the newline-joined names; binds models to the vocabulary.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char c) {
      h ^= c;
      h *= 0x100000001b3ULL;
    };
    for (const auto& name : names_) {
      for (unsigned char c : name) mix(c);
      mix('\n');
    }
    return h;
  }

  friend bool operator==(const SyscallVocabulary& a, const SyscallVocabulary& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline SyscallVocabulary build_vocabulary(std::span<const SyscallEvent> training_events) {
  std::vector<std::string> names;
  names.reserve(training_events.size());
  for (const auto& e : training_events) names.push_back(e.syscall);
  return SyscallVocabulary(std::move(names));
}

struct FrequencyVector {
  std::vector<std::int64_t> counts;
  std::int64_t window_index = 0;
  int session_id = 0;

  friend bool operator==(const FrequencyVector&, const FrequencyVector&) = default;
};

/// Half-open range [begin, end) of window positions belonging to one session.
struct SessionRange {
  int session_id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
};

struct WindowedSeries {
  std::shared_ptr<const SyscallVocabulary> vocabulary;
  std::int64_t interval_ns = kNsPerSec;
  std::vector<FrequencyVector> windows;
  std::vector<bool> labels;

  std::size_t size() const { return windows.size(); }
  std::size_t dim() const { return vocabulary ? vocabulary->dim() : 0; }

  std::size_t attack_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  }

  // Windows are stored session-contiguous in ascending window order.
  std::vector<SessionRange> sessions() const {
    std::vector<SessionRange> out;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (out.empty() || out.back().session_id != windows[i].session_id) {
        out.push_back({windows[i].session_id, i, i});
      }
      out.back().end = i + 1;
    }
    return out;
  }

  /// Rows are windows, columns are vocabulary dimensions.
  Eigen::MatrixXd to_matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(dim()));
    for (std::size_t r = 0; r < windows.size(); ++r) {
      for (std::size_t c = 0; c < dim(); ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            static_cast<double>(windows[r].counts[c]);
      }
    }
    return m;
  }

  // Keeps the windows whose position satisfies pred, preserving order.
  template <typename Pred>
  WindowedSeries filter(Pred pred) const {
    WindowedSeries out{vocabulary, interval_ns, {}, {}};
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (pred(i)) {
        out.windows.push_back(windows[i]);
        out.labels.push_back(labels[i]);
      }
    }
    return out;
  }
};

}  // namespace sentinel
