#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "sentinel/error.hpp"
#include "sentinel/ingest.hpp"
#include "sentinel/lstm.hpp"
#include "sentinel/ocsvm.hpp"
#include "sentinel/pca.hpp"

// Model files are JSON documents:
//   {"format": "sentinel-model", "version": 1, "kind": "pca" | "ocsvm" | "lstm",
//    "vocab_hash": "<16 hex digits>", ...payload}
// Tensors are {"rows": r, "cols": c, "data": [row-major values]}. Doubles are
// written in shortest round-trip form, so a load reproduces every bit.

namespace sentinel {

inline constexpr int kModelFormatVersion = 1;

namespace io {

using nlohmann::json;

inline json tensor(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd tensor(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
    throw Error(ErrorKind::ModelFormat, "tensor size does not match its declared dims");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

inline json vector(const Eigen::VectorXd& v) { return tensor(Eigen::MatrixXd(v.transpose())); }

inline Eigen::VectorXd vector(const json& j) {
  Eigen::MatrixXd m = tensor(j);
  if (m.rows() != 1 && m.size() != 0) throw Error(ErrorKind::ModelFormat, "expected a row vector");
  return m.transpose();
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(ErrorKind::ModelFormat, "bad hash '" + s + "'");
  return v;
}

inline json scaler(const Scaler& s) {
  return {{"kind", std::string(to_string(s.kind))}, {"offset", vector(s.offset)}, {"scale", vector(s.scale)}};
}

inline Scaler scaler(const json& j) {
  return {scaler_kind_from_string(j.at("kind").get<std::string>()), vector(j.at("offset")), vector(j.at("scale"))};
}

inline json header(const char* kind, std::uint64_t vocab_hash) {
  return {{"format", "sentinel-model"}, {"version", kModelFormatVersion}, {"kind", kind},
          {"vocab_hash", hex64(vocab_hash)}};
}

inline void check_header(const json& j, const char* kind) {
  if (j.value("format", "") != "sentinel-model") throw Error(ErrorKind::ModelFormat, "not a sentinel model file");
  if (j.value("version", 0) != kModelFormatVersion) throw Error(ErrorKind::ModelFormat, "unsupported model version");
  if (j.value("kind", "") != kind) {
    throw Error(ErrorKind::ModelFormat, std::string("expected a ") + kind + " model, found " + j.value("kind", "?"));
  }
}

template <typename Fn>
auto guarded(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ModelFormat, e.what());
  }
}

}  // namespace io

struct StoredModelHeader {
  std::string kind;
  std::uint64_t vocab_hash = 0;
};

inline nlohmann::json to_json(const PcaDensityModel& m, std::uint64_t vocab_hash) {
  auto j = io::header("pca", vocab_hash);
  j["k"] = m.k;
  j["sigma2"] = m.sigma2;
  j["mean"] = io::vector(m.mean);
  j["components"] = io::tensor(m.components);
  j["eigenvalues"] = io::vector(m.eigenvalues);
  j["scaler"] = io::scaler(m.scaler);
  return j;
}

inline PcaDensityModel pca_from_json(const nlohmann::json& j) {
  return io::guarded([&] {
    io::check_header(j, "pca");
    PcaDensityModel m;
    m.k = j.at("k").get<std::size_t>();
    m.sigma2 = j.at("sigma2").get<double>();
    m.mean = io::vector(j.at("mean"));
    m.components = io::tensor(j.at("components"));
    m.eigenvalues = io::vector(j.at("eigenvalues"));
    m.scaler = io::scaler(j.at("scaler"));
    if (m.components.rows() != m.mean.size() || static_cast<std::size_t>(m.components.cols()) != m.k ||
        m.eigenvalues.size() != m.mean.size()) {
      throw Error(ErrorKind::ModelFormat, "pca tensors have inconsistent dims");
    }
    return m;
  });
}

inline nlohmann::json to_json(const OcsvmModel& m, std::uint64_t vocab_hash) {
  auto j = io::header("ocsvm", vocab_hash);
  j["rho"] = m.rho;
  j["gamma"] = m.gamma;
  j["nu"] = m.nu;
  j["support_vectors"] = io::tensor(m.support_vectors);
  j["alphas"] = io::vector(m.alphas);
  j["scaler"] = io::scaler(m.scaler);
  return j;
}

inline OcsvmModel ocsvm_from_json(const nlohmann::json& j) {
  return io::guarded([&] {
    io::check_header(j, "ocsvm");
    OcsvmModel m;
    m.rho = j.at("rho").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.nu = j.at("nu").get<double>();
    m.support_vectors = io::tensor(j.at("support_vectors"));
    m.alphas = io::vector(j.at("alphas"));
    m.scaler = io::scaler(j.at("scaler"));
    if (m.alphas.size() != m.support_vectors.rows()) {
      throw Error(ErrorKind::ModelFormat, "ocsvm alphas do not match support vectors");
    }
    return m;
  });
}

inline nlohmann::json to_json(const LstmHyperparams& hp) {
  return {{"hidden_units", hp.hidden_units}, {"delta", hp.delta},
          {"batch_size", hp.batch_size},     {"epochs", hp.epochs},
          {"validation_split", hp.validation_split}, {"learning_rate", hp.learning_rate},
          {"adam_beta1", hp.adam_beta1},     {"adam_beta2", hp.adam_beta2},
          {"adam_eps", hp.adam_eps},         {"clip_norm", hp.clip_norm},
          {"fpr_target", hp.fpr_target},     {"seed", hp.seed}};
}

inline LstmHyperparams hyperparams_from_json(const nlohmann::json& j) {
  LstmHyperparams hp;
  hp.hidden_units = j.at("hidden_units").get<std::size_t>();
  hp.delta = j.at("delta").get<std::size_t>();
  hp.batch_size = j.at("batch_size").get<std::size_t>();
  hp.epochs = j.at("epochs").get<std::size_t>();
  hp.validation_split = j.at("validation_split").get<double>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.adam_beta1 = j.at("adam_beta1").get<double>();
  hp.adam_beta2 = j.at("adam_beta2").get<double>();
  hp.adam_eps = j.at("adam_eps").get<double>();
  hp.clip_norm = j.at("clip_norm").get<double>();
  hp.fpr_target = j.at("fpr_target").get<double>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

inline nlohmann::json to_json(const LstmPredictor& m, std::uint64_t vocab_hash) {
  auto j = io::header("lstm", vocab_hash);
  const auto& w = m.weights;
  j["input_dim"] = w.input_dim();
  j["hidden"] = w.hidden();
  j["w_input"] = io::tensor(w.w_input());
  j["w_recurrent"] = io::tensor(w.w_recurrent());
  j["bias"] = io::vector(Eigen::VectorXd(w.bias()));
  j["w_output"] = io::tensor(w.w_output());
  j["b_output"] = io::vector(Eigen::VectorXd(w.b_output()));
  j["scaler"] = io::scaler(m.scaler);
  j["idf"] = {{"weights", io::vector(m.idf.weights)}, {"num_training_windows", m.idf.num_training_windows}};
  j["threshold"] = m.threshold;
  j["hyperparams"] = to_json(m.hyperparams);
  j["train_loss"] = m.train_loss;
  j["val_loss"] = m.val_loss;
  return j;
}

inline LstmPredictor lstm_from_json(const nlohmann::json& j) {
  return io::guarded([&] {
    io::check_header(j, "lstm");
    LstmPredictor m;
    const auto d = j.at("input_dim").get<std::size_t>();
    const auto h = j.at("hidden").get<std::size_t>();
    m.weights = LstmWeights(d, h);
    auto assign = [](auto&& dst, const Eigen::MatrixXd& src, const char* name) {
      if (dst.rows() != src.rows() || dst.cols() != src.cols()) {
        throw Error(ErrorKind::ModelFormat, std::string("lstm tensor ") + name + " has wrong dims");
      }
      dst = src;
    };
    assign(m.weights.w_input(), io::tensor(j.at("w_input")), "w_input");
    assign(m.weights.w_recurrent(), io::tensor(j.at("w_recurrent")), "w_recurrent");
    assign(m.weights.bias(), io::vector(j.at("bias")), "bias");
    assign(m.weights.w_output(), io::tensor(j.at("w_output")), "w_output");
    assign(m.weights.b_output(), io::vector(j.at("b_output")), "b_output");
    m.scaler = io::scaler(j.at("scaler"));
    m.idf.weights = io::vector(j.at("idf").at("weights"));
    m.idf.num_training_windows = j.at("idf").at("num_training_windows").get<std::int64_t>();
    m.threshold = j.at("threshold").get<double>();
    m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    m.train_loss = j.at("train_loss").get<std::vector<double>>();
    m.val_loss = j.at("val_loss").get<std::vector<double>>();
    if (m.scaler.dim() != d || m.idf.dim() != d) throw Error(ErrorKind::ModelFormat, "lstm scaler/idf dims mismatch");
    return m;
  });
}

inline StoredModelHeader read_header(const nlohmann::json& j) {
  return io::guarded([&] {
    if (j.value("format", "") != "sentinel-model") throw Error(ErrorKind::ModelFormat, "not a sentinel model file");
    return StoredModelHeader{j.at("kind").get<std::string>(), io::parse_hex64(j.at("vocab_hash").get<std::string>())};
  });
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ModelFormat, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ModelFormat, path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + path);
  out << j.dump(1) << '\n';
}

}  // namespace sentinel
