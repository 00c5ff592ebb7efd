#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sentinel/error.hpp"
#include "sentinel/ingest.hpp"
#include "sentinel/random.hpp"
#include "sentinel/trace_model.hpp"

namespace sentinel {

struct LstmHyperparams {
  std::size_t hidden_units = 100;
  std::size_t delta = 15;
  std::size_t batch_size = 128;
  std::size_t epochs = 150;
  double validation_split = 0.20;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  double fpr_target = 0.01;
  std::uint64_t seed = 0;

  static LstmHyperparams paper() { return {}; }

  // Desk-scale profile for CI runs.
  static LstmHyperparams test() {
    LstmHyperparams hp;
    hp.hidden_units = 16;
    hp.epochs = 40;
    hp.batch_size = 32;
    return hp;
  }

  void validate() const {
    if (hidden_units == 0 || delta == 0 || batch_size == 0 || epochs == 0) {
      throw Error(ErrorKind::Config, "LSTM sizes must be positive");
    }
    if (!(validation_split > 0.0 && validation_split < 1.0)) {
      throw Error(ErrorKind::Config, "validation_split must be in (0, 1)");
    }
    if (!(learning_rate > 0.0) || !(adam_eps > 0.0) || !(clip_norm > 0.0)) {
      throw Error(ErrorKind::Config, "learning rate, eps and clip norm must be positive");
    }
    if (!(fpr_target > 0.0 && fpr_target < 1.0)) throw Error(ErrorKind::Config, "fpr target must be in (0, 1)");
  }
};

// All trainable parameters in one flat buffer; the accessors map views onto
// it. Gate blocks are stacked in the order input, forget, cell, output.
class LstmWeights {
 public:
  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  LstmWeights() = default;
  LstmWeights(std::size_t input_dim, std::size_t hidden)
      : d_(static_cast<Eigen::Index>(input_dim)),
        h_(static_cast<Eigen::Index>(hidden)),
        data_(Eigen::VectorXd::Zero(total_size(input_dim, hidden))) {}

  static Eigen::Index total_size(std::size_t d, std::size_t h) {
    const auto dd = static_cast<Eigen::Index>(d);
    const auto hh = static_cast<Eigen::Index>(h);
    return 4 * hh * dd + 4 * hh * hh + 4 * hh + dd * hh + dd;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(d_); }
  std::size_t hidden() const { return static_cast<std::size_t>(h_); }

  Eigen::VectorXd& flat() { return data_; }
  const Eigen::VectorXd& flat() const { return data_; }

  MatMap w_input() { return {data_.data() + off_w_input(), 4 * h_, d_}; }
  MatMap w_recurrent() { return {data_.data() + off_w_recurrent(), 4 * h_, h_}; }
  VecMap bias() { return {data_.data() + off_bias(), 4 * h_}; }
  MatMap w_output() { return {data_.data() + off_w_output(), d_, h_}; }
  VecMap b_output() { return {data_.data() + off_b_output(), d_}; }

  ConstMatMap w_input() const { return {data_.data() + off_w_input(), 4 * h_, d_}; }
  ConstMatMap w_recurrent() const { return {data_.data() + off_w_recurrent(), 4 * h_, h_}; }
  ConstVecMap bias() const { return {data_.data() + off_bias(), 4 * h_}; }
  ConstMatMap w_output() const { return {data_.data() + off_w_output(), d_, h_}; }
  ConstVecMap b_output() const { return {data_.data() + off_b_output(), d_}; }

  /// Weights uniform in +-1/sqrt(h); forget-gate bias 1, other biases 0.
  static LstmWeights initialize(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
    LstmWeights w(input_dim, hidden);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto fill = [&](auto&& m) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
      }
    };
    fill(w.w_input());
    fill(w.w_recurrent());
    fill(w.w_output());
    w.bias().segment(w.h_, w.h_).setOnes();
    return w;
  }

  bool all_finite() const { return data_.allFinite(); }

 private:
  Eigen::Index off_w_input() const { return 0; }
  Eigen::Index off_w_recurrent() const { return 4 * h_ * d_; }
  Eigen::Index off_bias() const { return off_w_recurrent() + 4 * h_ * h_; }
  Eigen::Index off_w_output() const { return off_bias() + 4 * h_; }
  Eigen::Index off_b_output() const { return off_w_output() + d_ * h_; }

  Eigen::Index d_ = 0;
  Eigen::Index h_ = 0;
  Eigen::VectorXd data_;
};

namespace detail {

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

// Activations of one batched forward pass, kept for backpropagation.
struct LstmTape {
  std::vector<Eigen::MatrixXd> inputs;  // per step, d x B
  std::vector<Eigen::ArrayXXd> i, f, g, o, c, tanh_c;
  std::vector<Eigen::MatrixXd> h;       // h[0] is the zero initial state
  Eigen::MatrixXd output;               // d x B
};

inline LstmTape forward_batch(const LstmWeights& w, std::vector<Eigen::MatrixXd> steps) {
  const auto h = static_cast<Eigen::Index>(w.hidden());
  const Eigen::Index batch = steps.empty() ? 0 : steps.front().cols();
  LstmTape tape;
  tape.inputs = std::move(steps);
  tape.h.push_back(Eigen::MatrixXd::Zero(h, batch));
  Eigen::ArrayXXd c_prev = Eigen::ArrayXXd::Zero(h, batch);
  for (const auto& x : tape.inputs) {
    Eigen::MatrixXd z = w.w_input() * x + w.w_recurrent() * tape.h.back();
    z.colwise() += w.bias();
    Eigen::ArrayXXd i = sigmoid(z.topRows(h).array());
    Eigen::ArrayXXd f = sigmoid(z.middleRows(h, h).array());
    Eigen::ArrayXXd g = z.middleRows(2 * h, h).array().tanh();
    Eigen::ArrayXXd o = sigmoid(z.bottomRows(h).array());
    Eigen::ArrayXXd c = f * c_prev + i * g;
    Eigen::ArrayXXd tc = c.tanh();
    tape.h.push_back((o * tc).matrix());
    tape.i.push_back(std::move(i));
    tape.f.push_back(std::move(f));
    tape.g.push_back(std::move(g));
    tape.o.push_back(std::move(o));
    tape.c.push_back(c);
    tape.tanh_c.push_back(std::move(tc));
    c_prev = std::move(c);
  }
  tape.output = w.w_output() * tape.h.back();
  tape.output.colwise() += w.b_output();
  return tape;
}

// Backpropagation through time given dLoss/dOutput; returns the flat gradient.
inline Eigen::VectorXd backward_batch(const LstmWeights& w, const LstmTape& tape, const Eigen::MatrixXd& d_output) {
  LstmWeights grad(w.input_dim(), w.hidden());
  const auto h = static_cast<Eigen::Index>(w.hidden());
  const Eigen::Index batch = d_output.cols();

  grad.w_output() = d_output * tape.h.back().transpose();
  grad.b_output() = d_output.rowwise().sum();
  Eigen::ArrayXXd dh = (w.w_output().transpose() * d_output).array();
  Eigen::ArrayXXd dc = Eigen::ArrayXXd::Zero(h, batch);
  Eigen::MatrixXd dz(4 * h, batch);

  for (std::size_t t = tape.inputs.size(); t-- > 0;) {
    const auto& i = tape.i[t];
    const auto& f = tape.f[t];
    const auto& g = tape.g[t];
    const auto& o = tape.o[t];
    const auto& tc = tape.tanh_c[t];
    Eigen::ArrayXXd c_prev = t > 0 ? tape.c[t - 1] : Eigen::ArrayXXd::Zero(h, batch);

    dc += dh * o * (1.0 - tc.square());
    dz.topRows(h) = (dc * g * i * (1.0 - i)).matrix();
    dz.middleRows(h, h) = (dc * c_prev * f * (1.0 - f)).matrix();
    dz.middleRows(2 * h, h) = (dc * i * (1.0 - g.square())).matrix();
    dz.bottomRows(h) = (dh * tc * o * (1.0 - o)).matrix();

    grad.w_input() += dz * tape.inputs[t].transpose();
    grad.w_recurrent() += dz * tape.h[t].transpose();
    grad.bias() += dz.rowwise().sum();
    dh = (w.w_recurrent().transpose() * dz).array();
    dc = dc * f;
  }
  return std::move(grad.flat());
}

}  // namespace detail

/// Mean squared error over every output entry of the batch, with its gradient.
/// Each element of steps is one time step laid out d x batch.
inline double lstm_loss_and_gradient(const LstmWeights& w, const std::vector<Eigen::MatrixXd>& steps,
                                     const Eigen::MatrixXd& targets, Eigen::VectorXd* gradient) {
  auto tape = detail::forward_batch(w, steps);
  Eigen::MatrixXd diff = tape.output - targets;
  const double denom = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / denom;
  if (gradient) *gradient = detail::backward_batch(w, tape, (2.0 / denom) * diff);
  return loss;
}

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;

  explicit AdamState(Eigen::Index n = 0) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void update(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const LstmHyperparams& hp) {
    ++step;
    m = hp.adam_beta1 * m + (1.0 - hp.adam_beta1) * grad;
    v = hp.adam_beta2 * v + (1.0 - hp.adam_beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(hp.adam_beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hp.adam_beta2, static_cast<double>(step));
    params.array() -= hp.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + hp.adam_eps);
  }
};

struct LstmPredictor {
  LstmWeights weights;
  Scaler scaler;  // minmax, fitted on training windows
  IdfWeights idf;
  double threshold = 0.0;
  LstmHyperparams hyperparams;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;

  std::size_t dim() const { return weights.input_dim(); }
  std::size_t delta() const { return hyperparams.delta; }
};

/// Runs the recurrence over a delta x d block of scaled windows (rows are
/// time steps, oldest first) and returns the predicted next scaled window.
inline Eigen::VectorXd lstm_forward(const LstmWeights& w, const Eigen::MatrixXd& seq) {
  require_dims(static_cast<std::size_t>(seq.cols()), w.input_dim(), "lstm_forward input");
  std::vector<Eigen::MatrixXd> steps;
  steps.reserve(static_cast<std::size_t>(seq.rows()));
  for (Eigen::Index t = 0; t < seq.rows(); ++t) steps.push_back(seq.row(t).transpose());
  return detail::forward_batch(w, std::move(steps)).output.col(0);
}

inline Eigen::VectorXd lstm_forward(const LstmPredictor& model, const Eigen::MatrixXd& seq) {
  if (static_cast<std::size_t>(seq.rows()) != model.delta()) {
    throw Error(ErrorKind::DimensionMismatch, "sequence must have exactly delta windows");
  }
  return lstm_forward(model.weights, seq);
}

/// sqrt(sum_i w_i (actual_i - pred_i)^2)
inline double weighted_distance(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual,
                                const IdfWeights& idf) {
  require_dims(static_cast<std::size_t>(pred.size()), static_cast<std::size_t>(actual.size()), "weighted_distance");
  require_dims(idf.dim(), static_cast<std::size_t>(actual.size()), "weighted_distance weights");
  return std::sqrt((idf.weights.array() * (actual - pred).array().square()).sum());
}

/// Upper order statistic at quantile 1 - p: sorted[ceil((m - 1)(1 - p))].
/// At most floor((m - 1) p) values exceed the result.
inline double calibrate_threshold(std::vector<double> distances, double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::Config, "p must be in (0, 1)");
  if (distances.empty()) throw Error(ErrorKind::InsufficientData, "no calibration distances");
  std::sort(distances.begin(), distances.end());
  const double pos = static_cast<double>(distances.size() - 1) * (1.0 - p);
  auto idx = static_cast<std::size_t>(std::ceil(pos - 1e-12));
  idx = std::min(idx, distances.size() - 1);
  return distances[idx];
}

namespace detail {

// Training examples: for every window t with delta predecessors in the same
// session, inputs are windows t-delta..t-1 and the target is window t.
struct SequenceSet {
  std::vector<std::size_t> targets;  // window positions in the series
};

inline SequenceSet build_sequences(const WindowedSeries& series, std::size_t delta) {
  SequenceSet set;
  for (const auto& s : series.sessions()) {
    for (std::size_t t = s.begin + delta; t < s.end; ++t) set.targets.push_back(t);
  }
  return set;
}

inline std::vector<Eigen::MatrixXd> gather_steps(const Eigen::MatrixXd& scaled, std::span<const std::size_t> targets,
                                                 std::size_t delta) {
  std::vector<Eigen::MatrixXd> steps(delta, Eigen::MatrixXd(scaled.cols(), static_cast<Eigen::Index>(targets.size())));
  for (std::size_t b = 0; b < targets.size(); ++b) {
    for (std::size_t k = 0; k < delta; ++k) {
      steps[k].col(static_cast<Eigen::Index>(b)) =
          scaled.row(static_cast<Eigen::Index>(targets[b] - delta + k)).transpose();
    }
  }
  return steps;
}

inline Eigen::MatrixXd gather_targets(const Eigen::MatrixXd& rows, std::span<const std::size_t> targets) {
  Eigen::MatrixXd out(rows.cols(), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t b = 0; b < targets.size(); ++b) {
    out.col(static_cast<Eigen::Index>(b)) = rows.row(static_cast<Eigen::Index>(targets[b])).transpose();
  }
  return out;
}

// Predictions (in count space) for a set of target windows, in chunks.
inline Eigen::MatrixXd predict_counts(const LstmPredictor& model, const Eigen::MatrixXd& scaled,
                                      std::span<const std::size_t> targets) {
  Eigen::MatrixXd out(scaled.cols(), static_cast<Eigen::Index>(targets.size()));
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < targets.size(); start += kChunk) {
    auto chunk = targets.subspan(start, std::min(kChunk, targets.size() - start));
    auto tape = forward_batch(model.weights, gather_steps(scaled, chunk, model.delta()));
    Eigen::MatrixXd counts = model.scaler.invert(Eigen::MatrixXd(tape.output.transpose())).transpose();
    out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(chunk.size())) = counts;
  }
  return out;
}

inline std::vector<double> distances_for(const LstmPredictor& model, const Eigen::MatrixXd& raw, const Eigen::MatrixXd& scaled,
                                         std::span<const std::size_t> targets, const IdfWeights& idf) {
  Eigen::MatrixXd pred = predict_counts(model, scaled, targets);
  std::vector<double> out(targets.size());
  for (std::size_t b = 0; b < targets.size(); ++b) {
    out[b] = weighted_distance(pred.col(static_cast<Eigen::Index>(b)),
                               raw.row(static_cast<Eigen::Index>(targets[b])).transpose(), idf);
  }
  return out;
}

}  // namespace detail

struct LstmScores {
  std::vector<std::optional<double>> scores;  // aligned with series windows
  std::vector<bool> flags;
  std::size_t unscored = 0;
};

/// Scores every window that has delta predecessors in its session. Pass a
/// different weight vector to compare against the model's own IDF weights.
inline LstmScores lstm_score_series(const LstmPredictor& model, const WindowedSeries& series,
                                    const IdfWeights* weights = nullptr) {
  require_dims(series.dim(), model.dim(), "lstm_score_series");
  const IdfWeights& idf = weights ? *weights : model.idf;
  LstmScores out;
  out.scores.assign(series.size(), std::nullopt);
  out.flags.assign(series.size(), false);
  auto seqs = detail::build_sequences(series, model.delta());
  out.unscored = series.size() - seqs.targets.size();
  if (seqs.targets.empty()) return out;
  Eigen::MatrixXd raw = series.to_matrix();
  Eigen::MatrixXd scaled = model.scaler.apply(raw);
  auto dist = detail::distances_for(model, raw, scaled, seqs.targets, idf);
  for (std::size_t b = 0; b < seqs.targets.size(); ++b) {
    out.scores[seqs.targets[b]] = dist[b];
    out.flags[seqs.targets[b]] = dist[b] > model.threshold;
  }
  return out;
}

/// Threshold from legitimate windows: T such that at most a fraction p of
/// their distances exceed it.
inline double calibrate_threshold(const LstmPredictor& model, const WindowedSeries& legit_validation, double p) {
  auto scored = lstm_score_series(model, legit_validation);
  std::vector<double> d;
  for (const auto& s : scored.scores) {
    if (s) d.push_back(*s);
  }
  if (d.empty()) throw Error(ErrorKind::InsufficientData, "validation series has no scoreable window");
  return calibrate_threshold(std::move(d), p);
}

inline constexpr double kMinThreshold = 1e-12;

/// Fits the predictor on a legitimate series. The last validation_split of
/// the (chronologically ordered) sequences is held out for validation loss
/// and threshold calibration.
inline LstmPredictor train_lstm(const WindowedSeries& series, const LstmHyperparams& hp) {
  hp.validate();
  auto seqs = detail::build_sequences(series, hp.delta);
  if (seqs.targets.empty()) {
    throw Error(ErrorKind::InsufficientData, "no session has delta + 1 windows");
  }

  LstmPredictor model;
  model.hyperparams = hp;
  Eigen::MatrixXd raw = series.to_matrix();
  model.scaler = fit_scaler(raw, ScalerKind::MinMax);
  model.idf = compute_idf_weights(series);
  model.weights = LstmWeights::initialize(series.dim(), hp.hidden_units, hp.seed);
  Eigen::MatrixXd scaled = model.scaler.apply(raw);

  const std::size_t total = seqs.targets.size();
  const auto split_at = static_cast<std::size_t>(static_cast<double>(total) * (1.0 - hp.validation_split));
  std::vector<std::size_t> train_idx(seqs.targets.begin(), seqs.targets.begin() + static_cast<std::ptrdiff_t>(split_at));
  std::vector<std::size_t> val_idx(seqs.targets.begin() + static_cast<std::ptrdiff_t>(split_at), seqs.targets.end());
  if (train_idx.empty()) {
    train_idx = seqs.targets;
    val_idx.clear();
  }

  AdamState adam(model.weights.flat().size());
  Rng rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
  Eigen::VectorXd grad;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(train_idx);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += hp.batch_size) {
      std::span<const std::size_t> batch(train_idx.data() + start, std::min(hp.batch_size, train_idx.size() - start));
      auto steps = detail::gather_steps(scaled, batch, hp.delta);
      Eigen::MatrixXd targets = detail::gather_targets(scaled, batch);
      const double loss = lstm_loss_and_gradient(model.weights, steps, targets, &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw Error(ErrorKind::TrainingDiverged, "non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      const double norm = grad.norm();
      if (norm > hp.clip_norm) grad *= hp.clip_norm / norm;
      adam.update(model.weights.flat(), grad, hp);
      loss_sum += loss * static_cast<double>(batch.size());
    }
    model.train_loss.push_back(loss_sum / static_cast<double>(train_idx.size()));
    if (!val_idx.empty()) {
      auto steps = detail::gather_steps(scaled, val_idx, hp.delta);
      Eigen::MatrixXd targets = detail::gather_targets(scaled, val_idx);
      model.val_loss.push_back(lstm_loss_and_gradient(model.weights, steps, targets, nullptr));
    }
  }
  if (!model.weights.all_finite()) throw Error(ErrorKind::TrainingDiverged, "weights became non-finite");

  const auto& calib = val_idx.empty() ? train_idx : val_idx;
  std::vector<std::size_t> calib_sorted(calib.begin(), calib.end());
  std::sort(calib_sorted.begin(), calib_sorted.end());
  auto d = detail::distances_for(model, raw, scaled, calib_sorted, model.idf);
  model.threshold = std::max(calibrate_threshold(std::move(d), hp.fpr_target), kMinThreshold);
  return model;
}

}  // namespace sentinel
