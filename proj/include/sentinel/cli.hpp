#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "sentinel/error.hpp"
#include "sentinel/eval.hpp"
#include "sentinel/ingest.hpp"
#include "sentinel/pipeline.hpp"
#include "sentinel/workloadgen.hpp"

namespace sentinel::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kDivergence = 4 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::BadRank:
    case ErrorKind::SpanOutOfRange:
      return kConfigError;
    case ErrorKind::TrainingDiverged:
    case ErrorKind::NonConvergence:
    case ErrorKind::EigenFailure:
      return kDivergence;
    default:
      return kDataError;
  }
}

inline const char* exit_label(int code) {
  switch (code) {
    case kConfigError: return "config";
    case kDivergence: return "divergence";
    default: return "data";
  }
}

// "300s", "1500ms", "2m", "250000ns"; a bare number is seconds.
inline std::int64_t parse_duration(const std::string& text) {
  std::size_t pos = 0;
  while (pos < text.size() && (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.')) ++pos;
  const std::string number = text.substr(0, pos);
  const std::string unit = text.substr(pos);
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(number, &used);
    if (used != number.size()) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Config, "bad duration '" + text + "'");
  }
  double scale = 0.0;
  if (unit.empty() || unit == "s") scale = 1e9;
  else if (unit == "ms") scale = 1e6;
  else if (unit == "us") scale = 1e3;
  else if (unit == "ns") scale = 1.0;
  else if (unit == "m" || unit == "min") scale = 60e9;
  else throw Error(ErrorKind::Config, "bad duration unit in '" + text + "'");
  return static_cast<std::int64_t>(std::llround(value * scale));
}

inline std::int64_t parse_interval(const std::string& text) {
  static const std::set<std::string> allowed{"100ms", "500ms", "1s", "2s"};
  if (!allowed.count(text)) throw Error(ErrorKind::Config, "--interval must be one of 100ms, 500ms, 1s, 2s");
  return parse_duration(text);
}

inline std::set<Detector> parse_detectors(const std::string& text) {
  if (text == "all") return {Detector::Pca, Detector::Ocsvm, Detector::Lstm};
  std::set<Detector> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.insert(detector_from_string(item));
  if (out.empty()) throw Error(ErrorKind::Config, "no detector selected");
  return out;
}

inline std::vector<double> parse_fpr_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      double v = std::stod(item, &used);
      if (used != item.size() || !(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Config, "bad --fpr-list entry '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::Config, "--fpr-list is empty");
  return out;
}

inline LstmHyperparams hyperparams_for_profile(const std::string& name) {
  if (name == "paper") return LstmHyperparams::paper();
  if (name == "test") return LstmHyperparams::test();
  throw Error(ErrorKind::Config, "unknown hyper-parameter profile '" + name + "' (paper|test)");
}

inline std::vector<SyscallEvent> read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::EmptyInput, "cannot open trace " + path);
  return parse_trace(in);
}

inline std::vector<LabelSpan> read_labels_file(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::EmptyInput, "cannot open labels " + path);
  return parse_labels(in);
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + p.string());
  return out;
}

// ---------------------------------------------------------------------------

struct GenOptions {
  std::string profile = "default";
  std::string attack;
  std::string duration = "300s";
  std::string at;
  std::string dur;
  std::size_t bursts = 1;
  int sessions = 1;
  std::uint64_t seed = 7;
  std::string out = ".";
};

inline int cmd_gen(const GenOptions& o, std::ostream& log) {
  ScenarioSpec spec;
  if (o.profile.ends_with(".json")) {
    spec.workload = workload_profile_from_json(read_json_file(o.profile));
  } else {
    spec.workload = builtin_profile(o.profile);
  }
  spec.duration_ns = parse_duration(o.duration);
  spec.sessions = o.sessions;
  spec.seed = o.seed;
  if (!o.attack.empty()) {
    spec.attack = o.attack.ends_with(".json") ? attack_profile_from_json(read_json_file(o.attack))
                                              : builtin_attack(o.attack);
    spec.bursts = o.bursts;
    if (!o.at.empty()) spec.at_ns = parse_duration(o.at);
    if (!o.dur.empty()) spec.burst_ns = parse_duration(o.dur);
  } else if (!o.at.empty() || !o.dur.empty()) {
    throw Error(ErrorKind::Config, "--at/--dur need --attack");
  }
  Scenario sc = generate_scenario(spec);
  const std::filesystem::path dir(o.out);
  {
    auto f = open_out(dir / "trace.csv");
    write_trace(f, sc.events);
  }
  {
    auto f = open_out(dir / "labels.csv");
    write_labels(f, sc.spans);
  }
  log << "wrote " << sc.events.size() << " events, " << sc.spans.size() << " attack spans to " << dir.string()
      << '\n';
  return kOk;
}

struct TrainOptions {
  std::string trace;
  std::string labels;
  std::string out = "models";
  std::string interval = "1s";
  std::string detector = "all";
  std::string profile;  // empty: SENTINEL_PROFILE, then paper
  std::optional<std::size_t> pca_k;
  std::optional<double> nu;
  std::optional<double> gamma;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> delta;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<double> fpr_target;
  std::optional<std::uint64_t> seed;
  bool allow_attack_windows = false;
};

inline int cmd_train(const TrainOptions& o, std::ostream& log) {
  TrainConfig cfg;
  cfg.interval_ns = parse_interval(o.interval);
  cfg.detectors = parse_detectors(o.detector);
  std::string profile = o.profile;
  if (profile.empty()) {
    const char* env = std::getenv("SENTINEL_PROFILE");
    profile = env && *env ? env : "paper";
  }
  cfg.lstm = hyperparams_for_profile(profile);
  cfg.lstm_profile = profile;
  if (o.hidden) cfg.lstm.hidden_units = *o.hidden;
  if (o.delta) cfg.lstm.delta = *o.delta;
  if (o.epochs) cfg.lstm.epochs = *o.epochs;
  if (o.batch) cfg.lstm.batch_size = *o.batch;
  if (o.fpr_target) cfg.lstm.fpr_target = *o.fpr_target;
  if (o.seed) cfg.lstm.seed = *o.seed;
  cfg.lstm.validate();
  cfg.pca_k = o.pca_k;
  if (o.nu) cfg.ocsvm.nu = *o.nu;
  if (o.gamma) cfg.ocsvm.gamma = *o.gamma;
  if (!(cfg.ocsvm.nu > 0.0 && cfg.ocsvm.nu <= 1.0)) throw Error(ErrorKind::Config, "--nu must be in (0, 1]");
  cfg.allow_attack_windows = o.allow_attack_windows;

  auto events = read_trace_file(o.trace);
  auto spans = read_labels_file(o.labels);
  TrainedModels models = train_models(events, spans, cfg);
  for (const auto& w : models.warnings) log << "warning: " << w << '\n';
  models.manifest["seed"] = cfg.lstm.seed;
  save_models(models, o.out);
  log << "trained";
  for (Detector d : cfg.detectors) log << ' ' << to_string(d);
  log << " on " << models.manifest["training_windows"].get<std::size_t>() << " windows -> " << o.out << '\n';
  return kOk;
}

struct ScoreOptions {
  std::string models = "models";
  std::string trace;
  std::string labels;
  std::string interval;  // empty: the trained interval
  std::string detector = "all";
  std::string out = "scores.csv";
};

inline int cmd_score(const ScoreOptions& o, std::ostream& log) {
  const auto wanted = parse_detectors(o.detector);
  TrainedModels models = load_models(o.models, wanted);
  for (Detector d : wanted) {
    const bool loaded = (d == Detector::Pca && models.pca) || (d == Detector::Ocsvm && models.ocsvm) ||
                        (d == Detector::Lstm && models.lstm);
    // "all" means whatever was trained; an explicit choice must exist.
    if (!loaded && o.detector != "all") {
      throw Error(ErrorKind::ModelFormat, "no " + std::string(to_string(d)) + " model in " + o.models);
    }
  }
  if (!models.pca && !models.ocsvm && !models.lstm) throw Error(ErrorKind::ModelFormat, "no models in " + o.models);
  const std::int64_t interval = o.interval.empty() ? models.interval_ns : parse_interval(o.interval);
  auto events = read_trace_file(o.trace);
  auto spans = read_labels_file(o.labels);
  ScoreResult result = score_trace(models, events, spans, interval);
  if (models.lstm && result.lstm_unscored > 0) {
    log << "warning: " << result.lstm_unscored << " windows unscored by lstm (fewer than delta="
        << models.lstm->delta() << " preceding windows in their session)\n";
  }
  auto f = open_out(o.out);
  write_scores_csv(f, result.rows);
  log << "wrote " << result.rows.size() << " scores to " << o.out << '\n';
  return kOk;
}

struct EvalOptions {
  std::vector<std::string> scores;  // name=path or path
  std::string fpr_list = "0.01,0.05,0.1";
  std::string out = "report";
  bool svg = false;
  bool strict_intersection = false;
};

inline std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& log) {
  if (o.scores.empty()) throw Error(ErrorKind::Config, "need at least one --scores");
  std::vector<ScenarioScores> scenarios;
  std::set<std::string> names;
  for (const auto& arg : o.scores) {
    ScenarioScores s;
    std::string path = arg;
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      s.name = arg.substr(0, eq);
      path = arg.substr(eq + 1);
    } else {
      s.name = std::filesystem::path(arg).stem().string();
    }
    if (s.name.empty() || s.name == "averaged" || !names.insert(s.name).second) {
      throw Error(ErrorKind::Config, "scenario name '" + s.name + "' is empty, reserved or repeated");
    }
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::EmptyInput, "cannot open scores " + path);
    s.rows = read_scores_csv(in);
    scenarios.push_back(std::move(s));
  }
  EvalReport report = evaluate_scores(scenarios, parse_fpr_list(o.fpr_list), o.strict_intersection);
  const std::filesystem::path dir(o.out);
  {
    auto f = open_out(dir / "summary.csv");
    write_summary_csv(f, report);
  }
  for (const auto& s : report.scenarios) {
    auto f = open_out(dir / ("roc_" + safe_name(s.scenario) + ".csv"));
    write_roc_csv(f, s);
    if (o.svg) {
      auto g = open_out(dir / ("roc_" + safe_name(s.scenario) + ".svg"));
      write_roc_svg(g, s);
    }
  }
  write_summary_csv(log, report);
  return kOk;
}

// ---------------------------------------------------------------------------

/// Full command line entry point. Output goes to out, diagnostics to err.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Host-based anomaly detection over windowed syscall frequencies"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic trace and its attack labels");
  g->add_option("--profile", gen.profile, "Workload: default | pipeline | profile.json")->capture_default_str();
  g->add_option("--attack", gen.attack, "frequency-shift | order-shuffle | rare-syscall | attack.json");
  g->add_option("--duration", gen.duration, "Session length, e.g. 300s")->capture_default_str();
  g->add_option("--at", gen.at, "Place one burst at this offset in session 0");
  g->add_option("--dur", gen.dur, "Burst length, e.g. 15s");
  g->add_option("--bursts", gen.bursts, "Bursts spread over the sessions")->capture_default_str();
  g->add_option("--sessions", gen.sessions, "Number of sessions")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Scenario seed")->capture_default_str();
  g->add_option("-o,--out", gen.out, "Output directory (trace.csv, labels.csv)")->capture_default_str();

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Fit detectors on a legitimate trace");
  t->add_option("--trace", train.trace, "Trace CSV")->required();
  t->add_option("--labels", train.labels, "Label CSV (optional)");
  t->add_option("-o,--out", train.out, "Model directory")->capture_default_str();
  t->add_option("--interval", train.interval, "100ms | 500ms | 1s | 2s")->capture_default_str();
  t->add_option("--detector", train.detector, "pca | ocsvm | lstm | all (comma list allowed)")->capture_default_str();
  t->add_option("--profile", train.profile, "Hyper-parameter profile paper | test (env SENTINEL_PROFILE)");
  t->add_option("--pca-k", train.pca_k, "PCA components (default 20)");
  t->add_option("--nu", train.nu, "OCSVM nu (default 0.05)");
  t->add_option("--gamma", train.gamma, "OCSVM RBF gamma (default: scale)");
  t->add_option("--hidden", train.hidden, "LSTM hidden units");
  t->add_option("--delta", train.delta, "LSTM sequence length (default 15)");
  t->add_option("--epochs", train.epochs, "LSTM epochs");
  t->add_option("--batch", train.batch, "LSTM batch size");
  t->add_option("--fpr-target", train.fpr_target, "LSTM threshold false positive rate (default 0.01)");
  t->add_option("--seed", train.seed, "LSTM seed (default 0)");
  t->add_flag("--allow-attack-windows", train.allow_attack_windows, "Train even if labels mark attack windows");

  ScoreOptions score;
  auto* s = app.add_subcommand("score", "Score a trace with trained models");
  s->add_option("--models", score.models, "Model directory")->capture_default_str();
  s->add_option("--trace", score.trace, "Trace CSV")->required();
  s->add_option("--labels", score.labels, "Label CSV (optional)");
  s->add_option("--interval", score.interval, "Must match the trained interval");
  s->add_option("--detector", score.detector, "pca | ocsvm | lstm | all")->capture_default_str();
  s->add_option("-o,--out", score.out, "Scores CSV")->capture_default_str();

  EvalOptions eval;
  EvalOptions report;
  report.svg = true;
  for (auto [name, opts, help] : {std::tuple{"eval", &eval, "ROC/AUC tables from score files"},
                                  std::tuple{"report", &report, "ROC/AUC tables plus SVG plots"}}) {
    auto* e = app.add_subcommand(name, help);
    e->add_option("--scores", opts->scores, "name=scores.csv, repeatable")->required();
    e->add_option("--fpr-list", opts->fpr_list, "Fixed FPRs for the TPR columns")->capture_default_str();
    e->add_option("-o,--out", opts->out, "Output directory")->capture_default_str();
    e->add_flag("--svg,!--no-svg", opts->svg, "Write one ROC SVG per scenario");
    e->add_flag("--strict-intersection", opts->strict_intersection,
                "Compare detectors only on windows all of them scored");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error[config]: " << msg << '\n';
    return kConfigError;
  }

  try {
    if (app.got_subcommand("gen")) return cmd_gen(gen, err);
    if (app.got_subcommand("train")) return cmd_train(train, err);
    if (app.got_subcommand("score")) return cmd_score(score, err);
    if (app.got_subcommand("eval")) return cmd_eval(eval, out);
    if (app.got_subcommand("report")) return cmd_eval(report, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error[" << exit_label(code) << "]: " << msg << '\n';
    return code;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error[config]: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace sentinel::cli
