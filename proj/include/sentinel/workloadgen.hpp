#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sentinel/error.hpp"
#include "sentinel/random.hpp"
#include "sentinel/trace_model.hpp"

namespace sentinel {

/// A fixed short syscall sequence; consecutive calls are separated by a gap
/// drawn uniformly from [jitter_lo_ns, jitter_hi_ns].
struct ActionTemplate {
  std::string name;
  std::vector<std::string> calls;
  std::int64_t jitter_lo_ns = 1 * kNsPerMs;
  std::int64_t jitter_hi_ns = 20 * kNsPerMs;
};

struct WorkloadProfile {
  std::string name = "custom";
  std::vector<std::string> syscalls;
  std::vector<ActionTemplate> templates;
  std::vector<std::vector<double>> transitions;  // row-stochastic, templates x templates
  std::int64_t think_lo_ns = 1 * kNsPerSec;
  std::int64_t think_hi_ns = 5 * kNsPerSec;
  std::uint64_t seed = 1;

  void validate() const {
    const std::size_t k = templates.size();
    if (k == 0) throw Error(ErrorKind::Config, "profile has no action templates");
    if (transitions.size() != k) throw Error(ErrorKind::Config, "transition matrix must be templates x templates");
    for (const auto& row : transitions) {
      if (row.size() != k) throw Error(ErrorKind::Config, "transition matrix must be square");
      double sum = 0.0;
      for (double p : row) {
        if (p < 0.0) throw Error(ErrorKind::Config, "negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::Config, "transition rows must sum to 1");
    }
    if (think_lo_ns <= 0 || think_lo_ns > think_hi_ns) throw Error(ErrorKind::Config, "bad think-time bounds");
    std::set<std::string> alphabet(syscalls.begin(), syscalls.end());
    for (const auto& t : templates) {
      if (t.calls.empty()) throw Error(ErrorKind::Config, "template '" + t.name + "' is empty");
      if (t.jitter_lo_ns <= 0 || t.jitter_lo_ns > t.jitter_hi_ns) {
        throw Error(ErrorKind::Config, "bad jitter bounds in template '" + t.name + "'");
      }
      for (const auto& c : t.calls) {
        if (!alphabet.empty() && !alphabet.count(c)) {
          throw Error(ErrorKind::Config, "template '" + t.name + "' uses '" + c + "' outside the syscall set");
        }
      }
    }
  }
};

enum class AttackMode { FrequencyShift, OrderShuffle };

inline std::string_view to_string(AttackMode m) {
  return m == AttackMode::FrequencyShift ? "frequency-shift" : "order-shuffle";
}

inline AttackMode attack_mode_from_string(std::string_view s) {
  if (s == "frequency-shift") return AttackMode::FrequencyShift;
  if (s == "order-shuffle") return AttackMode::OrderShuffle;
  throw Error(ErrorKind::Config, "unknown attack mode '" + std::string(s) + "'");
}

// frequency-shift: splices a burst whose calls are drawn from burst_mix at a
// rate drawn from [rate_lo_hz, rate_hi_hz]. order-shuffle: permutes whole
// shuffle_window_ns slots of the existing trace inside the span.
struct AttackProfile {
  std::string kind = "enum_network";
  AttackMode mode = AttackMode::FrequencyShift;
  std::vector<std::pair<std::string, double>> burst_mix;
  double rate_lo_hz = 60.0;
  double rate_hi_hz = 120.0;
  std::int64_t duration_lo_ns = 8 * kNsPerSec;
  std::int64_t duration_hi_ns = 12 * kNsPerSec;
  std::int64_t shuffle_window_ns = kNsPerSec;

  void validate() const {
    if (mode == AttackMode::FrequencyShift) {
      if (burst_mix.empty()) throw Error(ErrorKind::Config, "frequency-shift attack needs a burst mix");
      if (!(rate_lo_hz > 0.0 && rate_lo_hz <= rate_hi_hz)) throw Error(ErrorKind::Config, "bad burst rate bounds");
    }
    if (shuffle_window_ns <= 0) throw Error(ErrorKind::Config, "shuffle window must be positive");
    if (duration_lo_ns <= 0 || duration_lo_ns > duration_hi_ns) throw Error(ErrorKind::Config, "bad duration bounds");
  }
};

/// Events of one legitimate session plus the walk that produced them.
struct LegitTrace {
  std::vector<SyscallEvent> events;
  std::vector<std::size_t> actions;
};

namespace detail {

// SplitMix64 finalizer; derives independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Semi-Markov walk: think time, run the current template, pick the next one
/// from its transition row. The first action is drawn uniformly.
inline LegitTrace generate_legit_walk(const WorkloadProfile& profile, std::int64_t duration_ns, int session_id) {
  profile.validate();
  if (duration_ns <= 0) throw Error(ErrorKind::Config, "duration must be positive");
  Rng rng(detail::mix_seed(profile.seed, static_cast<std::uint64_t>(session_id)));
  LegitTrace out;
  std::size_t action = static_cast<std::size_t>(rng.below(profile.templates.size()));
  std::int64_t t = rng.between(profile.think_lo_ns, profile.think_hi_ns);
  while (t < duration_ns) {
    const auto& tpl = profile.templates[action];
    out.actions.push_back(action);
    for (std::size_t c = 0; c < tpl.calls.size(); ++c) {
      if (c > 0) t += rng.between(tpl.jitter_lo_ns, tpl.jitter_hi_ns);
      if (t >= duration_ns) break;
      out.events.push_back({t, tpl.calls[c], session_id});
    }
    t += rng.between(profile.think_lo_ns, profile.think_hi_ns);
    action = rng.categorical(profile.transitions[action]);
  }
  return out;
}

inline std::vector<SyscallEvent> generate_legit(const WorkloadProfile& profile, std::int64_t duration_ns,
                                                int session_id) {
  return generate_legit_walk(profile, duration_ns, session_id).events;
}

/// Stationary distribution of a row-stochastic matrix by power iteration.
inline std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& p) {
  const std::size_t k = p.size();
  std::vector<double> pi(k, 1.0 / static_cast<double>(k));
  for (int it = 0; it < 100000; ++it) {
    std::vector<double> next(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) next[j] += pi[i] * p[i][j];
    }
    // Averaging with the previous iterate damps periodic chains.
    double diff = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      next[j] = 0.5 * (next[j] + pi[j]);
      diff = std::max(diff, std::abs(next[j] - pi[j]));
    }
    pi = std::move(next);
    if (diff < 1e-15) break;
  }
  return pi;
}

struct InjectedTrace {
  std::vector<SyscallEvent> events;
  LabelSpan span;
};

/// Injects one attack over [at_ns, at_ns + duration_ns) of a single session
/// spanning [0, session_ns).
inline InjectedTrace inject_attack(std::vector<SyscallEvent> events, std::int64_t session_ns,
                                   const AttackProfile& attack, std::int64_t at_ns, std::int64_t duration_ns,
                                   std::uint64_t seed, int session_id) {
  attack.validate();
  if (at_ns < 0 || duration_ns <= 0 || at_ns + duration_ns > session_ns) {
    throw Error(ErrorKind::SpanOutOfRange, "attack span [" + std::to_string(at_ns) + ", " +
                                               std::to_string(at_ns + duration_ns) + ") outside session of " +
                                               std::to_string(session_ns) + " ns");
  }
  const std::int64_t end_ns = at_ns + duration_ns;
  Rng rng(detail::mix_seed(seed, static_cast<std::uint64_t>(at_ns)));

  if (attack.mode == AttackMode::FrequencyShift) {
    std::vector<double> weights;
    for (const auto& [name, w] : attack.burst_mix) weights.push_back(w);
    const double rate = rng.uniform(attack.rate_lo_hz, attack.rate_hi_hz);
    const double mean_gap = 1e9 / rate;
    std::vector<SyscallEvent> burst;
    double t = static_cast<double>(at_ns) + rng.uniform(0.0, mean_gap);
    while (t < static_cast<double>(end_ns)) {
      const auto ts = static_cast<std::int64_t>(t);
      burst.push_back({ts, attack.burst_mix[rng.categorical(weights)].first, session_id});
      t += rng.uniform(0.5 * mean_gap, 1.5 * mean_gap);
    }
    std::vector<SyscallEvent> merged;
    merged.reserve(events.size() + burst.size());
    std::merge(events.begin(), events.end(), burst.begin(), burst.end(), std::back_inserter(merged),
               [](const SyscallEvent& a, const SyscallEvent& b) { return a.timestamp_ns < b.timestamp_ns; });
    events = std::move(merged);
  } else {
    const std::int64_t w = attack.shuffle_window_ns;
    if (at_ns % w != 0 || duration_ns % w != 0) {
      throw Error(ErrorKind::Config, "order-shuffle span must align to the shuffle window");
    }
    const auto slots = static_cast<std::size_t>(duration_ns / w);
    std::vector<std::size_t> perm(slots);
    std::iota(perm.begin(), perm.end(), 0);
    if (slots >= 2) {
      // Rejection-sample a derangement so that no slot keeps its position.
      while (true) {
        rng.shuffle(perm);
        bool fixed_point = false;
        for (std::size_t j = 0; j < slots; ++j) fixed_point = fixed_point || perm[j] == j;
        if (!fixed_point) break;
      }
    }
    for (auto& e : events) {
      if (e.timestamp_ns >= at_ns && e.timestamp_ns < end_ns) {
        const auto slot = static_cast<std::size_t>((e.timestamp_ns - at_ns) / w);
        e.timestamp_ns += (static_cast<std::int64_t>(perm[slot]) - static_cast<std::int64_t>(slot)) * w;
      }
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const SyscallEvent& a, const SyscallEvent& b) { return a.timestamp_ns < b.timestamp_ns; });
  }
  return {std::move(events), LabelSpan{session_id, at_ns, end_ns, attack.kind}};
}

// ---------------------------------------------------------------------------
// Built-in profiles

inline std::vector<std::string> default_syscall_alphabet() {
  return {"accept",  "access",     "brk",    "clone",  "close",  "connect",  "epoll_wait", "execve",
          "fcntl",   "fstat",      "futex",  "getdents", "ioctl", "lseek",   "lstat",      "mmap",
          "mprotect", "munmap",    "open",   "openat", "pipe",   "poll",     "read",       "recvfrom",
          "select",  "sendto",     "socket", "stat",   "write",  "writev"};
}

namespace detail {

inline ActionTemplate tpl(std::string name, std::vector<std::string> calls, std::int64_t lo_ms, std::int64_t hi_ms) {
  return {std::move(name), std::move(calls), lo_ms * kNsPerMs, hi_ms * kNsPerMs};
}

inline std::vector<std::string> repeat(std::initializer_list<std::string> block, int times) {
  std::vector<std::string> out;
  for (int i = 0; i < times; ++i) out.insert(out.end(), block.begin(), block.end());
  return out;
}

inline std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace detail

/// Interactive web application: user think times of 1-5 s between requests.
inline WorkloadProfile web_profile() {
  using detail::concat;
  using detail::repeat;
  using detail::tpl;
  WorkloadProfile p;
  p.name = "web";
  p.syscalls = default_syscall_alphabet();
  p.templates = {
      tpl("page_view",
          concat({{"accept", "recvfrom", "futex", "stat", "openat", "fstat"},
                  repeat({"read", "mmap"}, 4),
                  {"fcntl", "close", "futex", "writev", "sendto", "epoll_wait", "close"}}),
          2, 15),
      tpl("login",
          concat({{"accept", "recvfrom", "futex", "socket", "connect", "sendto", "poll", "recvfrom"},
                  repeat({"read", "write"}, 3),
                  {"close", "futex", "writev", "sendto", "close"}}),
          2, 20),
      tpl("form_submit",
          concat({{"accept", "recvfrom", "futex", "open", "fcntl", "lseek"},
                  repeat({"write", "fstat"}, 4),
                  {"close", "socket", "connect", "sendto", "poll", "recvfrom", "close", "writev", "sendto"}}),
          2, 20),
      tpl("search",
          concat({{"accept", "recvfrom", "futex", "socket", "connect"},
                  repeat({"sendto", "poll", "recvfrom"}, 3),
                  {"brk", "mmap", "munmap", "close", "writev", "sendto"}}),
          2, 15),
      tpl("static_asset",
          {"accept", "recvfrom", "stat", "openat", "fstat", "mmap", "read", "munmap", "close", "writev",
           "sendto", "epoll_wait"},
          1, 8),
      tpl("maintenance",
          {"accept", "recvfrom", "access", "lstat", "getdents", "getdents", "clone", "pipe", "execve", "mprotect",
           "select", "ioctl", "close", "writev", "sendto"},
          3, 25),
  };
  p.transitions = {
      {0.30, 0.05, 0.15, 0.15, 0.33, 0.02},
      {0.50, 0.00, 0.20, 0.10, 0.18, 0.02},
      {0.45, 0.05, 0.10, 0.10, 0.28, 0.02},
      {0.40, 0.05, 0.10, 0.20, 0.23, 0.02},
      {0.35, 0.05, 0.15, 0.15, 0.28, 0.02},
      {0.50, 0.10, 0.10, 0.10, 0.20, 0.00},
  };
  p.think_lo_ns = 1 * kNsPerSec;
  p.think_hi_ns = 5 * kNsPerSec;
  p.seed = 1;
  return p;
}

/// Back-end job runner cycling through fixed stages with short pauses, so
/// consecutive windows follow a strongly predictable order.
inline WorkloadProfile pipeline_profile() {
  using detail::repeat;
  using detail::tpl;
  WorkloadProfile p;
  p.name = "pipeline";
  p.syscalls = default_syscall_alphabet();
  p.templates = {
      tpl("fetch", repeat({"socket", "connect", "sendto", "poll", "recvfrom"}, 6), 25, 40),
      tpl("parse", repeat({"read", "brk", "mmap"}, 10), 25, 40),
      tpl("transform", repeat({"futex", "mprotect", "munmap", "futex"}, 8), 25, 40),
      tpl("store", repeat({"openat", "lseek", "write", "fstat", "close"}, 6), 25, 40),
      tpl("index", repeat({"stat", "getdents", "lstat"}, 10), 25, 40),
      tpl("notify", repeat({"epoll_wait", "writev", "sendto"}, 10), 25, 40),
  };
  const std::size_t k = p.templates.size();
  p.transitions.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) p.transitions[i][(i + 1) % k] = 1.0;
  p.think_lo_ns = 50 * kNsPerMs;
  p.think_hi_ns = 150 * kNsPerMs;
  p.seed = 1;
  return p;
}

inline WorkloadProfile builtin_profile(std::string_view name) {
  if (name == "default" || name == "web") return web_profile();
  if (name == "pipeline") return pipeline_profile();
  throw Error(ErrorKind::Config, "unknown built-in profile '" + std::string(name) + "'");
}

/// Post-exploitation enumeration burst: heavy fcntl/close traffic.
inline AttackProfile frequency_shift_attack() {
  AttackProfile a;
  a.kind = "enum_network";
  a.mode = AttackMode::FrequencyShift;
  a.burst_mix = {{"fcntl", 0.35}, {"close", 0.25}, {"open", 0.15}, {"read", 0.10},
                 {"socket", 0.05}, {"ioctl", 0.05}, {"stat", 0.05}};
  a.rate_lo_hz = 60.0;
  a.rate_hi_hz = 120.0;
  return a;
}

/// Low-volume burst made only of calls the legitimate workload rarely uses.
inline AttackProfile rare_syscall_attack() {
  AttackProfile a;
  a.kind = "enum_configs";
  a.mode = AttackMode::FrequencyShift;
  a.burst_mix = {{"getdents", 0.4}, {"execve", 0.2}, {"clone", 0.2}, {"pipe", 0.2}};
  a.rate_lo_hz = 2.0;
  a.rate_hi_hz = 4.0;
  return a;
}

inline AttackProfile order_shuffle_attack() {
  AttackProfile a;
  a.kind = "ecryptfs_creds";
  a.mode = AttackMode::OrderShuffle;
  return a;
}

inline AttackProfile builtin_attack(std::string_view mode) {
  if (mode == "frequency-shift") return frequency_shift_attack();
  if (mode == "order-shuffle") return order_shuffle_attack();
  if (mode == "rare-syscall") return rare_syscall_attack();
  throw Error(ErrorKind::Config, "unknown attack '" + std::string(mode) + "'");
}

// ---------------------------------------------------------------------------
// Config files (JSON). Times are given in milliseconds.
//
// workload: {"name", "syscalls": [..], "templates": [{"name", "calls": [..],
//            "jitter_ms": [lo, hi]}], "transitions": [[..]],
//            "think_time_ms": [lo, hi], "seed"}
// attack:   {"kind", "mode": "frequency-shift" | "order-shuffle",
//            "burst": {"name": weight, ..}, "rate_hz": [lo, hi],
//            "duration_ms": [lo, hi], "shuffle_window_ms"}

inline nlohmann::json to_json(const WorkloadProfile& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["syscalls"] = p.syscalls;
  j["templates"] = nlohmann::json::array();
  for (const auto& t : p.templates) {
    j["templates"].push_back(
        {{"name", t.name}, {"calls", t.calls}, {"jitter_ms", {t.jitter_lo_ns / kNsPerMs, t.jitter_hi_ns / kNsPerMs}}});
  }
  j["transitions"] = p.transitions;
  j["think_time_ms"] = {p.think_lo_ns / kNsPerMs, p.think_hi_ns / kNsPerMs};
  j["seed"] = p.seed;
  return j;
}

namespace detail {

inline std::pair<std::int64_t, std::int64_t> ms_bounds(const nlohmann::json& j, const char* key) {
  const auto& b = j.at(key);
  if (!b.is_array() || b.size() != 2) throw Error(ErrorKind::Config, std::string(key) + " must be [lo, hi]");
  return {static_cast<std::int64_t>(std::llround(b[0].get<double>() * kNsPerMs)),
          static_cast<std::int64_t>(std::llround(b[1].get<double>() * kNsPerMs))};
}

}  // namespace detail

inline WorkloadProfile workload_profile_from_json(const nlohmann::json& j) {
  try {
    WorkloadProfile p;
    p.name = j.value("name", "custom");
    for (const auto& t : j.at("templates")) {
      ActionTemplate a;
      a.name = t.at("name").get<std::string>();
      a.calls = t.at("calls").get<std::vector<std::string>>();
      std::tie(a.jitter_lo_ns, a.jitter_hi_ns) = detail::ms_bounds(t, "jitter_ms");
      p.templates.push_back(std::move(a));
    }
    if (j.contains("syscalls")) {
      p.syscalls = j.at("syscalls").get<std::vector<std::string>>();
    } else {
      std::set<std::string> names;
      for (const auto& t : p.templates) names.insert(t.calls.begin(), t.calls.end());
      p.syscalls.assign(names.begin(), names.end());
    }
    p.transitions = j.at("transitions").get<std::vector<std::vector<double>>>();
    std::tie(p.think_lo_ns, p.think_hi_ns) = detail::ms_bounds(j, "think_time_ms");
    p.seed = j.value("seed", std::uint64_t{1});
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("workload profile: ") + e.what());
  }
}

inline nlohmann::json to_json(const AttackProfile& a) {
  nlohmann::json j;
  j["kind"] = a.kind;
  j["mode"] = std::string(to_string(a.mode));
  j["burst"] = nlohmann::json::object();
  for (const auto& [name, w] : a.burst_mix) j["burst"][name] = w;
  j["rate_hz"] = {a.rate_lo_hz, a.rate_hi_hz};
  j["duration_ms"] = {a.duration_lo_ns / kNsPerMs, a.duration_hi_ns / kNsPerMs};
  j["shuffle_window_ms"] = a.shuffle_window_ns / kNsPerMs;
  return j;
}

inline AttackProfile attack_profile_from_json(const nlohmann::json& j) {
  try {
    AttackProfile a;
    a.kind = j.value("kind", "attack");
    a.mode = attack_mode_from_string(j.value("mode", "frequency-shift"));
    if (j.contains("burst")) {
      for (const auto& [name, w] : j.at("burst").items()) a.burst_mix.emplace_back(name, w.get<double>());
    }
    if (j.contains("rate_hz")) {
      a.rate_lo_hz = j.at("rate_hz")[0].get<double>();
      a.rate_hi_hz = j.at("rate_hz")[1].get<double>();
    }
    if (j.contains("duration_ms")) std::tie(a.duration_lo_ns, a.duration_hi_ns) = detail::ms_bounds(j, "duration_ms");
    if (j.contains("shuffle_window_ms")) {
      a.shuffle_window_ns = static_cast<std::int64_t>(j.at("shuffle_window_ms").get<double>() * kNsPerMs);
    }
    a.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("attack profile: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Multi-session scenarios

struct ScenarioSpec {
  WorkloadProfile workload = web_profile();
  std::optional<AttackProfile> attack;
  int sessions = 1;
  std::int64_t duration_ns = 300 * kNsPerSec;
  std::size_t bursts = 0;                     // spread over all sessions
  std::optional<std::int64_t> at_ns;          // explicit single placement (session 0)
  std::optional<std::int64_t> burst_ns;       // fixed burst length; else drawn from the attack profile
  std::int64_t lead_in_ns = 20 * kNsPerSec;   // keep bursts clear of the session start
  std::int64_t align_ns = kNsPerSec;
  std::uint64_t seed = 7;
};

struct Scenario {
  std::vector<SyscallEvent> events;
  std::vector<LabelSpan> spans;
};

/// Generates sessions 0..n-1. Bursts are assigned round-robin to sessions
/// and each one lands at an aligned random offset inside its own equal-length
/// segment of the session, so bursts never overlap.
inline Scenario generate_scenario(const ScenarioSpec& spec) {
  if (spec.sessions < 1) throw Error(ErrorKind::Config, "need at least one session");
  if (spec.duration_ns <= 0) throw Error(ErrorKind::Config, "duration must be positive");
  Scenario out;
  WorkloadProfile workload = spec.workload;
  workload.seed = detail::mix_seed(spec.seed, workload.seed);
  Rng placement(detail::mix_seed(spec.seed, 0xa77ac4ULL));

  for (int s = 0; s < spec.sessions; ++s) {
    auto events = generate_legit(workload, spec.duration_ns, s);
    if (spec.attack) {
      std::vector<std::pair<std::int64_t, std::int64_t>> placements;
      auto draw_len = [&]() {
        if (spec.burst_ns) return *spec.burst_ns;
        std::int64_t len = placement.between(spec.attack->duration_lo_ns, spec.attack->duration_hi_ns);
        return std::max<std::int64_t>(spec.align_ns, len / spec.align_ns * spec.align_ns);
      };
      if (spec.at_ns) {
        if (s == 0) placements.emplace_back(*spec.at_ns, draw_len());
      } else {
        const std::size_t mine = spec.bursts / static_cast<std::size_t>(spec.sessions) +
                                 (static_cast<std::size_t>(s) < spec.bursts % static_cast<std::size_t>(spec.sessions));
        for (std::size_t b = 0; b < mine; ++b) {
          const std::int64_t seg = spec.duration_ns / static_cast<std::int64_t>(mine);
          const std::int64_t seg_start = static_cast<std::int64_t>(b) * seg;
          const std::int64_t len = draw_len();
          const std::int64_t lo = std::min(spec.lead_in_ns, std::max<std::int64_t>(seg - len, 0));
          const std::int64_t hi = seg - len;
          if (hi < 0) throw Error(ErrorKind::Config, "bursts do not fit into the session");
          std::int64_t off = placement.between(lo / spec.align_ns, hi / spec.align_ns) * spec.align_ns;
          placements.emplace_back(seg_start + off, len);
        }
      }
      for (const auto& [at, len] : placements) {
        auto injected = inject_attack(std::move(events), spec.duration_ns, *spec.attack, at, len,
                                      detail::mix_seed(spec.seed, static_cast<std::uint64_t>(s) + 1), s);
        events = std::move(injected.events);
        out.spans.push_back(injected.span);
      }
    }
    out.events.insert(out.events.end(), events.begin(), events.end());
  }
  return out;
}

}  // namespace sentinel
