// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "sentinel/eval.hpp"
#include "sentinel/ingest.hpp"
#include "sentinel/lstm.hpp"
#include "sentinel/ocsvm.hpp"
#include "sentinel/pca.hpp"
#include "sentinel/pipeline.hpp"
#include "sentinel/random.hpp"
#include "sentinel/workloadgen.hpp"

using namespace sentinel;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) {
    v.ok = false;
    v.detail += " [over time budget " + std::to_string(budget_s) + " s]";
  }
  failures += v.ok ? 0 : 1;
  std::printf("%s criterion %d: %s | %s | %.2f s\n", v.ok ? "PASS" : "FAIL", id, title.c_str(), v.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double gauss(Rng& rng) {
  const double u1 = 1.0 - rng.uniform01();
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Verdict windowize_oracle() {
  Rng rng(1001);
  const std::vector<std::string> names{"a", "b", "c", "d", "zz"};
  auto vocab = std::make_shared<const SyscallVocabulary>(std::vector<std::string>{"a", "b", "c", "d"});
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<SyscallEvent> ev;
    std::vector<LabelSpan> spans;
    const int sessions = 1 + static_cast<int>(rng.below(3));
    const std::int64_t interval = rng.between(1, 5) * 100;
    for (int s = 0; s < sessions; ++s) {
      std::int64_t t = rng.between(0, 300);
      for (int n = static_cast<int>(rng.below(40)); n >= 0; --n) {
        ev.push_back({t, names[rng.below(names.size())], s});
        t += rng.between(0, 250);
      }
      for (int k = static_cast<int>(rng.below(3)); k > 0; --k) {
        const std::int64_t a = rng.between(0, 5000);
        spans.push_back({s, a, a + rng.between(1, 700), "x"});
      }
    }
    auto series = windowize(ev, vocab, interval, spans);
    auto ref = oracle::recount(ev, interval);
    std::vector<std::int64_t> got(vocab->dim(), 0), want(vocab->dim(), 0);
    for (const auto& e : ev) want[vocab->contains(e.syscall) ? vocab->index_of(e.syscall) : vocab->oov_index()] += 1;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& w = series.windows[i];
      auto& r = ref[{w.session_id, w.window_index}];
      for (const auto& n : names) {
        const std::size_t j = vocab->contains(n) ? vocab->index_of(n) : vocab->oov_index();
        if (w.counts[j] != r[n]) return {false, "trial " + std::to_string(trial) + ": window count differs"};
      }
      for (std::size_t j = 0; j < w.counts.size(); ++j) got[j] += w.counts[j];
      const bool attack =
          oracle::window_is_attack(spans, w.session_id, w.window_index * interval, (w.window_index + 1) * interval);
      if (series.labels[i] != attack) return {false, "trial " + std::to_string(trial) + ": label differs"};
    }
    if (got != want) return {false, "trial " + std::to_string(trial) + ": totals not conserved"};
  }
  return {true, "500 traces, counts conserved and labels match"};
}

Verdict auc_oracle() {
  Rng rng(1002);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> s(n);
    std::vector<bool> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? static_cast<double>(rng.below(10)) : rng.uniform(-1, 1);
      l[i] = rng.below(2) == 1;
    }
    const std::size_t pos = rng.below(n);
    l[pos] = true;
    l[(pos + 1 + rng.below(n - 1)) % n] = false;
    const double a = auc(s, l);
    const double b = oracle::mann_whitney(s, l);
    if (a != b) return {false, "trial " + std::to_string(trial) + ": " + fmt(a) + " vs " + fmt(b)};
  }
  return {true, "1000 instances, exact equality"};
}

Verdict pca_oracle() {
  Rng rng(1003);
  double worst = 0.0;
  for (int d : {2, 3}) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c <= r; ++c) l(r, c) = r == c ? 0.5 + rng.uniform01() * 1.5 : rng.uniform(-1, 1);
    }
    Eigen::MatrixXd x(500, d);
    for (int r = 0; r < 500; ++r) {
      Eigen::VectorXd z(d);
      for (int c = 0; c < d; ++c) z(c) = gauss(rng);
      x.row(r) = (l * z).transpose() + Eigen::RowVectorXd::Constant(d, 0.7 * d);
    }
    Eigen::VectorXd mean;
    const Eigen::MatrixXd s = oracle::sample_covariance(x, &mean);

    // All eigenpairs by power iteration with deflation.
    std::vector<double> lambda;
    std::vector<Eigen::VectorXd> vecs;
    Eigen::MatrixXd rest = s;
    for (int j = 0; j < d; ++j) {
      auto [lj, vj] = oracle::top_eigenpair(rest);
      lambda.push_back(lj);
      vecs.push_back(vj);
      rest -= lj * vj * vj.transpose();
    }

    double prev_err = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= d; ++k) {
      auto m = fit_pca(x, static_cast<std::size_t>(k));
      // Dense covariance: retained eigenpairs plus the pooled minor variance.
      double sigma2 = 0.0;
      for (int j = k; j < d; ++j) sigma2 += lambda[static_cast<std::size_t>(j)];
      sigma2 = k < d ? std::max(sigma2 / (d - k), PcaDensityModel::kSigma2Floor) : PcaDensityModel::kSigma2Floor;
      Eigen::MatrixXd cov = sigma2 * Eigen::MatrixXd::Identity(d, d);
      for (int j = 0; j < k; ++j) {
        const auto& v = vecs[static_cast<std::size_t>(j)];
        cov += (std::max(lambda[static_cast<std::size_t>(j)], sigma2) - sigma2) * v * v.transpose();
      }
      for (int r = 0; r < 500; ++r) {
        Eigen::VectorXd p = x.row(r).transpose();
        // log-likelihood = -score
        const double diff = std::abs(-pca_score(m, p) + oracle::mvn_neg_log_pdf(p, mean, cov));
        worst = std::max(worst, diff);
      }
      auto ev = explained_variance(m);
      double running = 0.0;
      for (int j = 0; j < d; ++j) {
        running += lambda[static_cast<std::size_t>(j)];
        if (std::abs(ev[static_cast<std::size_t>(j)] - running / s.trace()) > 1e-9) {
          return {false, "explained variance differs at d=" + std::to_string(d)};
        }
      }
      double err = 0.0;
      for (int r = 0; r < 500; ++r) err += reconstruction_error(m, x.row(r).transpose());
      if (err > prev_err + 1e-9) return {false, "reconstruction error rose at k=" + std::to_string(k)};
      prev_err = err;
    }
  }
  if (worst > 1e-6) return {false, "max log-likelihood gap " + fmt(worst)};
  return {true, "max log-likelihood gap " + fmt(worst) + ", explained variance and reconstruction ok"};
}

Verdict ocsvm_oracle() {
  Rng rng(1004);
  constexpr double kKktTolerance = 1e-3;
  double worst_gap = 0.0, worst_kkt = 0.0, worst_ratio = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    Eigen::MatrixXd x(8, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2, 2);
    const double nu = trial % 2 ? 0.5 : 0.25;
    const double gamma = rng.uniform(0.2, 1.5);
    auto sol = solve_ocsvm_dual(x, nu, gamma);
    const double smo = ocsvm_dual_objective(sol.alpha, sol.gradient);
    const double brute = oracle::ocsvm_dual_min(oracle::gram(x, gamma), 1.0 / (nu * 8), 20);
    worst_gap = std::max(worst_gap, std::abs(smo - brute));
    worst_kkt = std::max(worst_kkt, ocsvm_kkt_residuals(sol).maxCoeff());
  }
  for (int fit = 0; fit < 100; ++fit) {
    const int n = 20 + static_cast<int>(rng.below(61));
    Eigen::MatrixXd x(n, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng) * (1 + i % 2);
    OcsvmParams p;
    p.nu = rng.uniform(0.05, 0.5);
    auto sol = solve_ocsvm_dual(x, p.nu, scale_gamma(x), p);
    worst_kkt = std::max(worst_kkt, ocsvm_kkt_residuals(sol).maxCoeff());
    auto m = fit_ocsvm(x, p);
    // Free support vectors sit on the boundary only up to solver tolerance, so an
    // outlier is a point past it by more than the KKT tolerance.
    int out = 0;
    for (int r = 0; r < n; ++r) {
      const double f = m.decision(x.row(r).transpose());
      out += f < -kKktTolerance;
    }
    if (out > p.nu * n + 2.0) {
      return {false, "fit " + std::to_string(fit) + ": " + std::to_string(out) + " outliers with nu=" + fmt(p.nu)};
    }
    worst_ratio = std::max(worst_ratio, out / (p.nu * n + 2.0));
  }
  if (worst_gap > 1e-3) return {false, "dual gap " + fmt(worst_gap)};
  if (worst_kkt > kKktTolerance) return {false, "kkt residual " + fmt(worst_kkt)};
  return {true, "dual gap " + fmt(worst_gap) + ", kkt " + fmt(worst_kkt) +
                    ", 100 fits respect nu (max outliers/(nu n + 2) = " + fmt(worst_ratio) + ")"};
}

Verdict lstm_gradient() {
  const std::size_t d = 3, h = 3, delta = 3;
  Rng rng(1005);
  LstmWeights w(d, h);
  for (Eigen::Index i = 0; i < w.flat().size(); ++i) w.flat()(i) = rng.uniform(-0.8, 0.8);
  std::vector<Eigen::MatrixXd> steps(delta, Eigen::MatrixXd(d, 4));
  for (auto& s : steps) {
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-1, 1);
  }
  Eigen::MatrixXd targets(d, 4);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets.data()[i] = rng.uniform(-1, 1);
  Eigen::VectorXd grad;
  lstm_loss_and_gradient(w, steps, targets, &grad);
  const double eps = 1e-6;
  double worst = 0.0;
  for (Eigen::Index p = 0; p < w.flat().size(); ++p) {
    LstmWeights plus = w, minus = w;
    plus.flat()(p) += eps;
    minus.flat()(p) -= eps;
    const double numeric = (lstm_loss_and_gradient(plus, steps, targets, nullptr) -
                            lstm_loss_and_gradient(minus, steps, targets, nullptr)) /
                           (2 * eps);
    worst = std::max(worst, std::abs(numeric - grad(p)) / std::max({std::abs(numeric), std::abs(grad(p)), 1e-6}));
  }
  const std::string detail = std::to_string(w.flat().size()) + " parameters, max relative error " + fmt(worst);
  return {worst < 1e-5, detail};
}

Verdict threshold_calibration() {
  Rng rng(1006);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> d(10 + rng.below(500));
    for (auto& v : d) v = rng.below(5) == 0 ? std::floor(rng.uniform(0, 4)) : -std::log(1.0 - rng.uniform01()) * 10;
    for (double p : {0.01, 0.05, 0.1}) {
      const double t = calibrate_threshold(d, p);
      std::size_t above = 0;
      for (double v : d) above += v > t;
      const double rate = static_cast<double>(above) / static_cast<double>(d.size());
      if (rate > p) return {false, "trial " + std::to_string(trial) + ": exceedance " + fmt(rate) + " > " + fmt(p)};
      worst = std::max(worst, rate - p);
    }
  }
  return {true, "300 calibrations, max exceedance minus p " + fmt(worst)};
}

struct ScenarioRun {
  TrainedModels models;
  Scenario test;
  EvalReport report;
};

ScenarioRun run_scenario(const WorkloadProfile& workload, const AttackProfile& attack, std::int64_t burst_ns) {
  ScenarioSpec train;
  train.workload = workload;
  train.duration_ns = 1200 * kNsPerSec;
  train.seed = 11;
  ScenarioSpec test = train;
  test.seed = 12;
  test.attack = attack;
  test.bursts = 10;
  if (burst_ns > 0) test.burst_ns = burst_ns;
  auto tr = generate_scenario(train);
  ScenarioRun out;
  out.test = generate_scenario(test);
  TrainConfig cfg;
  cfg.lstm = LstmHyperparams::test();
  cfg.lstm.seed = 3;
  cfg.lstm_profile = "test";
  out.models = train_models(tr.events, tr.spans, cfg);
  auto scored = score_trace(out.models, out.test.events, out.test.spans, kNsPerSec);
  out.report = evaluate_scores({{attack.kind, scored.rows}}, {0.01, 0.05, 0.1});
  return out;
}

double auc_of(const EvalReport& r, const std::string& det) {
  for (const auto& d : r.scenarios.front().detectors) {
    if (d.detector == det) return d.auc;
  }
  throw std::runtime_error("no " + det + " result");
}

Verdict frequency_shift() {
  auto run = run_scenario(web_profile(), frequency_shift_attack(), 0);
  const double p = auc_of(run.report, "pca"), o = auc_of(run.report, "ocsvm"), l = auc_of(run.report, "lstm");
  return {p >= 0.90 && o >= 0.90 && l >= 0.90, "AUC pca " + fmt(p) + ", ocsvm " + fmt(o) + ", lstm " + fmt(l)};
}

Verdict order_shuffle() {
  auto run = run_scenario(pipeline_profile(), order_shuffle_attack(), 15 * kNsPerSec);
  const double p = auc_of(run.report, "pca"), o = auc_of(run.report, "ocsvm"), l = auc_of(run.report, "lstm");
  return {p <= 0.65 && o <= 0.65 && l >= 0.85, "AUC pca " + fmt(p) + ", ocsvm " + fmt(o) + ", lstm " + fmt(l)};
}

Verdict idf_separation() {
  auto run = run_scenario(web_profile(), rare_syscall_attack(), 0);
  const auto& lstm = *run.models.lstm;
  WindowedSeries s = windowize(run.test.events, run.models.vocabulary, kNsPerSec, run.test.spans);
  const IdfWeights uniform = IdfWeights::uniform(s.dim());
  auto ratio = [&](const IdfWeights& w) {
    auto r = lstm_score_series(lstm, s, &w);
    double sa = 0, sl = 0;
    int na = 0, nl = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!r.scores[i]) continue;
      (s.labels[i] ? sa : sl) += *r.scores[i];
      (s.labels[i] ? na : nl) += 1;
    }
    if (na == 0 || nl == 0) throw std::runtime_error("scenario lacks scored attack or legit windows");
    return (sa / na) / (sl / nl);
  };
  const double with_idf = ratio(lstm.idf), flat = ratio(uniform);
  return {with_idf > flat, "ratio idf " + fmt(with_idf) + " vs uniform " + fmt(flat)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

// Full CLI pipeline in a fresh directory; returns summary.csv bytes.
std::string cli_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = quoted(SENTINEL_CLI_PATH);
  const std::string log = " >>" + quoted(dir / "log.txt") + " 2>&1";
  const std::vector<std::string> steps{
      cli + " gen --duration 300s --seed 21 -o " + quoted(dir / "train"),
      cli + " gen --duration 300s --seed 22 --attack frequency-shift --bursts 4 -o " + quoted(dir / "test"),
      cli + " train --trace " + quoted(dir / "train/trace.csv") + " --profile test --seed 5 -o " +
          quoted(dir / "models"),
      cli + " score --models " + quoted(dir / "models") + " --trace " + quoted(dir / "test/trace.csv") +
          " --labels " + quoted(dir / "test/labels.csv") + " -o " + quoted(dir / "scores.csv"),
      cli + " report --scores fs=" + quoted(dir / "scores.csv") + " -o " + quoted(dir / "report"),
  };
  for (const auto& cmd : steps) {
    if (std::system((cmd + log).c_str()) != 0) {
      throw std::runtime_error("command failed: " + cmd + "\n" + slurp(dir / "log.txt"));
    }
  }
  return slurp(dir / "report/summary.csv");
}

Verdict end_to_end_determinism() {
  const fs::path root = fs::temp_directory_path() / "sentinel_acceptance_e2e";
  const std::string a = cli_pipeline(root / "run_a");
  const std::string b = cli_pipeline(root / "run_b");
  fs::remove_all(root);
  if (a.empty()) return {false, "summary.csv is empty"};
  const auto lines = std::count(a.begin(), a.end(), '\n');
  return {a == b, std::to_string(a.size()) + " bytes, " + std::to_string(lines) + " lines, " +
                      (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
  criterion(1, "windowize oracle", 10, windowize_oracle);
  criterion(2, "AUC equals Mann-Whitney", 10, auc_oracle);
  criterion(3, "PCA dense Gaussian oracle", 10, pca_oracle);
  criterion(4, "OCSVM dual, KKT and nu", 60, ocsvm_oracle);
  criterion(5, "LSTM gradient check", 30, lstm_gradient);
  criterion(6, "threshold calibration", 5, threshold_calibration);
  criterion(7, "frequency-shift scenario", 180, frequency_shift);
  criterion(8, "order-shuffle scenario", 300, order_shuffle);
  criterion(9, "IDF separation", 120, idf_separation);
  criterion(10, "end-to-end determinism", 300, end_to_end_determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
