#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentinel/error.hpp"
#include "sentinel/eval.hpp"
#include "sentinel/ingest.hpp"
#include "sentinel/lstm.hpp"
#include "sentinel/model_io.hpp"
#include "sentinel/ocsvm.hpp"
#include "sentinel/pca.hpp"
#include "sentinel/trace_model.hpp"

namespace sentinel {

enum class Detector { Pca, Ocsvm, Lstm };

inline std::string_view to_string(Detector d) {
  switch (d) {
    case Detector::Pca: return "pca";
    case Detector::Ocsvm: return "ocsvm";
    case Detector::Lstm: return "lstm";
  }
  return "?";
}

inline Detector detector_from_string(std::string_view s) {
  if (s == "pca") return Detector::Pca;
  if (s == "ocsvm") return Detector::Ocsvm;
  if (s == "lstm") return Detector::Lstm;
  throw Error(ErrorKind::Config, "unknown detector '" + std::string(s) + "'");
}

inline constexpr std::size_t kDefaultPcaComponents = 20;

struct TrainConfig {
  std::int64_t interval_ns = kNsPerSec;
  std::set<Detector> detectors{Detector::Pca, Detector::Ocsvm, Detector::Lstm};
  std::optional<std::size_t> pca_k;  // unset: 20, clamped to d - 1 on small vocabularies
  OcsvmParams ocsvm;
  LstmHyperparams lstm = LstmHyperparams::paper();
  std::string lstm_profile = "paper";
  bool allow_attack_windows = false;
};

struct TrainedModels {
  std::shared_ptr<const SyscallVocabulary> vocabulary;
  std::int64_t interval_ns = 0;
  std::optional<PcaDensityModel> pca;
  std::optional<OcsvmModel> ocsvm;
  std::optional<LstmPredictor> lstm;
  std::vector<std::string> warnings;
  nlohmann::json manifest;
};

inline std::size_t effective_pca_k(const TrainConfig& cfg, std::size_t d, std::vector<std::string>* warnings) {
  if (cfg.pca_k) return *cfg.pca_k;
  std::size_t k = kDefaultPcaComponents;
  if (d <= kDefaultPcaComponents) {
    k = std::max<std::size_t>(1, d - 1);
    if (warnings) {
      warnings->push_back("vocabulary dimension " + std::to_string(d) + " <= 20; PCA uses k=" + std::to_string(k));
    }
  }
  return k;
}

/// Fits the vocabulary, scalers and selected detectors on a legitimate trace.
inline TrainedModels train_models(const std::vector<SyscallEvent>& events, const std::vector<LabelSpan>& spans,
                                  const TrainConfig& cfg) {
  if (events.empty()) throw Error(ErrorKind::InsufficientData, "training trace has no events");
  TrainedModels out;
  out.interval_ns = cfg.interval_ns;
  out.vocabulary = std::make_shared<const SyscallVocabulary>(build_vocabulary(events));
  WindowedSeries series = windowize(events, out.vocabulary, cfg.interval_ns, spans);

  if (series.attack_count() > 0) {
    if (!cfg.allow_attack_windows) {
      throw Error(ErrorKind::InsufficientData, "training trace has " + std::to_string(series.attack_count()) +
                                                   " attack-labeled windows");
    }
    out.warnings.push_back("training on " + std::to_string(series.attack_count()) + " attack-labeled windows");
  }

  const Eigen::MatrixXd raw = series.to_matrix();
  if (cfg.detectors.count(Detector::Pca) || cfg.detectors.count(Detector::Ocsvm)) {
    Scaler standard = fit_scaler(raw, ScalerKind::Standardize);
    Eigen::MatrixXd scaled = standard.apply(raw);
    if (cfg.detectors.count(Detector::Pca)) {
      out.pca = fit_pca(scaled, effective_pca_k(cfg, series.dim(), &out.warnings), standard);
    }
    if (cfg.detectors.count(Detector::Ocsvm)) out.ocsvm = fit_ocsvm(scaled, cfg.ocsvm, standard);
  }
  if (cfg.detectors.count(Detector::Lstm)) out.lstm = train_lstm(series, cfg.lstm);

  auto& m = out.manifest;
  m["format"] = "sentinel-manifest";
  m["version"] = kModelFormatVersion;
  m["vocab_hash"] = io::hex64(out.vocabulary->hash());
  m["vocabulary"] = out.vocabulary->names();
  m["interval_ns"] = cfg.interval_ns;
  m["training_windows"] = series.size();
  m["models"] = nlohmann::json::object();
  if (out.pca) m["models"]["pca"] = {{"file", "pca.model"}, {"k", out.pca->k}};
  if (out.ocsvm) {
    m["models"]["ocsvm"] = {{"file", "ocsvm.model"},
                            {"nu", out.ocsvm->nu},
                            {"gamma", out.ocsvm->gamma},
                            {"support_vectors", out.ocsvm->support_vectors.rows()}};
  }
  if (out.lstm) {
    m["models"]["lstm"] = {{"file", "lstm.model"},
                           {"profile", cfg.lstm_profile},
                           {"hyperparams", to_json(out.lstm->hyperparams)},
                           {"threshold", out.lstm->threshold}};
  }
  return out;
}

inline void save_models(const TrainedModels& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto hash = models.vocabulary->hash();
  if (models.pca) write_json_file((dir / "pca.model").string(), to_json(*models.pca, hash));
  if (models.ocsvm) write_json_file((dir / "ocsvm.model").string(), to_json(*models.ocsvm, hash));
  if (models.lstm) write_json_file((dir / "lstm.model").string(), to_json(*models.lstm, hash));
  write_json_file((dir / "manifest.json").string(), models.manifest);
}

/// Loads the manifest plus every model it lists; each model must carry the
/// manifest's vocabulary hash.
inline TrainedModels load_models(const std::filesystem::path& dir, const std::set<Detector>& wanted) {
  TrainedModels out;
  out.manifest = read_json_file((dir / "manifest.json").string());
  io::guarded([&] {
    if (out.manifest.value("format", "") != "sentinel-manifest") {
      throw Error(ErrorKind::ModelFormat, "not a sentinel manifest");
    }
    out.vocabulary =
        std::make_shared<const SyscallVocabulary>(out.manifest.at("vocabulary").get<std::vector<std::string>>());
    out.interval_ns = out.manifest.at("interval_ns").get<std::int64_t>();
    return 0;
  });
  const auto hash = io::parse_hex64(out.manifest.at("vocab_hash").get<std::string>());
  if (hash != out.vocabulary->hash()) {
    throw Error(ErrorKind::VocabularyMismatch, "manifest vocabulary does not match its hash");
  }
  const auto& listed = out.manifest.at("models");
  for (Detector d : wanted) {
    const std::string name(to_string(d));
    if (!listed.contains(name)) continue;
    auto j = read_json_file((dir / listed.at(name).at("file").get<std::string>()).string());
    if (read_header(j).vocab_hash != hash) {
      throw Error(ErrorKind::VocabularyMismatch, name + " model was trained on a different vocabulary");
    }
    switch (d) {
      case Detector::Pca: out.pca = pca_from_json(j); break;
      case Detector::Ocsvm: out.ocsvm = ocsvm_from_json(j); break;
      case Detector::Lstm: out.lstm = lstm_from_json(j); break;
    }
  }
  return out;
}

struct ScoreRow {
  int session_id = 0;
  std::int64_t window_index = 0;
  bool label = false;
  std::string detector;
  double score = 0.0;
  std::optional<bool> flag;
};

struct ScoreResult {
  std::vector<ScoreRow> rows;
  std::size_t lstm_unscored = 0;
};

/// Windowizes with the training vocabulary (unseen names land in OOV) and
/// scores every window with each loaded detector.
inline ScoreResult score_trace(const TrainedModels& models, const std::vector<SyscallEvent>& events,
                               const std::vector<LabelSpan>& spans, std::int64_t interval_ns) {
  if (interval_ns != models.interval_ns) {
    throw Error(ErrorKind::IntervalMismatch, "trace interval " + std::to_string(interval_ns) +
                                                 " ns differs from the trained " +
                                                 std::to_string(models.interval_ns) + " ns");
  }
  WindowedSeries series = windowize(events, models.vocabulary, interval_ns, spans);
  ScoreResult out;
  const Eigen::MatrixXd raw = series.to_matrix();
  auto row_for = [&](std::size_t i, std::string_view det, double score, std::optional<bool> flag) {
    return ScoreRow{series.windows[i].session_id, series.windows[i].window_index, series.labels[i],
                    std::string(det), score, flag};
  };
  if (models.pca) {
    Eigen::MatrixXd scaled = models.pca->scaler.apply(raw);
    for (std::size_t i = 0; i < series.size(); ++i) {
      out.rows.push_back(row_for(i, "pca", pca_score(*models.pca, scaled.row(static_cast<Eigen::Index>(i)).transpose()),
                                 std::nullopt));
    }
  }
  if (models.ocsvm) {
    Eigen::MatrixXd scaled = models.ocsvm->scaler.apply(raw);
    for (std::size_t i = 0; i < series.size(); ++i) {
      out.rows.push_back(row_for(
          i, "ocsvm", ocsvm_score(*models.ocsvm, scaled.row(static_cast<Eigen::Index>(i)).transpose()), std::nullopt));
    }
  }
  if (models.lstm) {
    auto scored = lstm_score_series(*models.lstm, series);
    out.lstm_unscored = scored.unscored;
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (scored.scores[i]) out.rows.push_back(row_for(i, "lstm", *scored.scores[i], scored.flags[i]));
    }
  }
  return out;
}

inline constexpr std::string_view kScoresHeader = "session_id,window_index,label,detector,score,flag";

inline void write_scores_csv(std::ostream& out, const std::vector<ScoreRow>& rows) {
  out << kScoresHeader << '\n';
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    out << r.session_id << ',' << r.window_index << ',' << (r.label ? 1 : 0) << ',' << r.detector << ',' << buf << ',';
    if (r.flag) out << (*r.flag ? 1 : 0);
    out << '\n';
  }
}

inline std::vector<ScoreRow> read_scores_csv(std::istream& in) {
  std::string line;
  if (!detail::next_line(in, line)) throw Error(ErrorKind::EmptyInput, "scores file is empty");
  if (line != kScoresHeader) detail::malformed(1, "expected header '" + std::string(kScoresHeader) + "'");
  std::vector<ScoreRow> rows;
  std::size_t line_no = 1;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 6) detail::malformed(line_no, "expected 6 fields");
    ScoreRow r;
    int label = 0;
    if (!detail::parse_int(f[0], r.session_id) || !detail::parse_int(f[1], r.window_index) ||
        !detail::parse_int(f[2], label) || (label != 0 && label != 1) || f[3].empty()) {
      detail::malformed(line_no, "bad field");
    }
    r.label = label == 1;
    r.detector = std::string(f[3]);
    try {
      std::size_t used = 0;
      r.score = std::stod(std::string(f[4]), &used);
      if (used != f[4].size()) detail::malformed(line_no, "bad score");
    } catch (const std::logic_error&) {
      detail::malformed(line_no, "bad score");
    }
    if (f[5] == "1") r.flag = true;
    else if (f[5] == "0") r.flag = false;
    else if (!f[5].empty()) detail::malformed(line_no, "bad flag");
    rows.push_back(std::move(r));
  }
  return rows;
}

struct ScenarioScores {
  std::string name;
  std::vector<ScoreRow> rows;
};

/// ROC/AUC per detector and scenario. With several scenarios an "averaged"
/// scenario pools all of their windows. strict_intersection restricts every
/// detector to the windows scored by all detectors of that scenario.
inline EvalReport evaluate_scores(const std::vector<ScenarioScores>& scenarios, std::vector<double> fpr_list,
                                  bool strict_intersection = false) {
  EvalReport report;
  report.fpr_list = std::move(fpr_list);

  auto evaluate_one = [&](const std::string& name, const std::vector<const ScoreRow*>& rows) {
    std::map<std::string, std::vector<const ScoreRow*>> by_det;
    for (const auto* r : rows) by_det[r->detector].push_back(r);

    std::set<std::pair<int, std::int64_t>> common;
    if (strict_intersection && !by_det.empty()) {
      std::map<std::pair<int, std::int64_t>, std::size_t> seen;
      for (const auto& [det, rs] : by_det) {
        for (const auto* r : rs) seen[{r->session_id, r->window_index}] += 1;
      }
      for (const auto& [key, count] : seen) {
        if (count == by_det.size()) common.insert(key);
      }
    }

    ScenarioResult result{name, {}};
    // Fixed detector order keeps reports stable.
    std::vector<std::string> order;
    for (auto d : {"pca", "ocsvm", "lstm"}) {
      if (by_det.count(d)) order.emplace_back(d);
    }
    for (const auto& [det, rs] : by_det) {
      if (std::find(order.begin(), order.end(), det) == order.end()) order.push_back(det);
    }
    for (const auto& det : order) {
      std::vector<double> scores;
      std::vector<bool> labels;
      for (const auto* r : by_det[det]) {
        if (strict_intersection && !common.count({r->session_id, r->window_index})) continue;
        scores.push_back(r->score);
        labels.push_back(r->label);
      }
      result.detectors.push_back(evaluate_detector(det, scores, labels, report.fpr_list));
    }
    report.scenarios.push_back(std::move(result));
  };

  for (const auto& s : scenarios) {
    std::vector<const ScoreRow*> rows;
    for (const auto& r : s.rows) rows.push_back(&r);
    evaluate_one(s.name, rows);
  }
  if (scenarios.size() > 1) {
    // Pooled windows must stay distinct across scenarios for the intersection.
    std::vector<ScoreRow> pooled;
    int offset = 0;
    for (const auto& s : scenarios) {
      int max_session = 0;
      for (auto r : s.rows) {
        max_session = std::max(max_session, r.session_id);
        r.session_id += offset;
        pooled.push_back(std::move(r));
      }
      offset += max_session + 1;
    }
    std::vector<const ScoreRow*> rows;
    for (const auto& r : pooled) rows.push_back(&r);
    evaluate_one("averaged", rows);
  }
  return report;
}

}  // namespace sentinel
