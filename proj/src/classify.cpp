#include "mmk/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "mmk/error.hpp"
#include "mmk/parallel.hpp"

namespace mmk {

namespace {

struct BinaryResult {
  Eigen::VectorXd w;  // feature weights followed by the bias weight
  std::vector<double> objective;
};

// Dual coordinate descent for the L2-loss SVM: minimize
// 1/2 a^T (Q + I/(2C)) a - e^T a subject to a >= 0, with Q_ij = y_i y_j x_i^T x_j.
// Each coordinate step minimizes the dual exactly, so the recorded objective
// never increases.
BinaryResult solve_binary(const std::vector<Eigen::VectorXd>& features, const std::vector<double>& y,
                          const LinearParams& params, std::uint64_t seed) {
  const std::size_t n = features.size();
  const auto dim = features.front().size();
  const double diag = 0.5 / params.C;
  const double b2 = params.bias_term * params.bias_term;

  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) qii[i] = features[i].squaredNorm() + b2 + diag;

  BinaryResult out;
  out.w = Eigen::VectorXd::Zero(dim + 1);
  std::vector<double> alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);

  const auto dual_objective = [&] {
    double a_sum = 0.0;
    double a_sq = 0.0;
    for (double a : alpha) {
      a_sum += a;
      a_sq += a * a;
    }
    return 0.5 * out.w.squaredNorm() + 0.5 * diag * a_sq - a_sum;
  };

  for (std::size_t epoch = 0; epoch < params.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double max_violation = 0.0;
    for (std::size_t i : order) {
      const double margin = y[i] * (out.w.head(dim).dot(features[i]) + out.w[dim] * params.bias_term);
      const double grad = margin - 1.0 + diag * alpha[i];
      const double projected = alpha[i] > 0.0 ? grad : std::min(grad, 0.0);
      max_violation = std::max(max_violation, std::abs(projected));
      if (projected == 0.0) continue;
      const double next = std::max(alpha[i] - grad / qii[i], 0.0);
      const double step = (next - alpha[i]) * y[i];
      alpha[i] = next;
      out.w.head(dim) += step * features[i];
      out.w[dim] += step * params.bias_term;
    }
    out.objective.push_back(dual_objective());
    if (max_violation <= params.eps) break;
  }
  return out;
}

std::vector<std::uint32_t> sorted_unique(std::vector<std::uint32_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void check_dataset(const FeatureDataset& ds) {
  if (ds.labels.size() != ds.size() || ds.subjects.size() != ds.size()) {
    throw Error("dataset features, labels and subjects differ in length");
  }
}

// Trains on `train`, predicts `test`, adds both into the report.
void run_fold(const FeatureDataset& ds, const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
              std::vector<std::uint32_t> test_subjects, const LinearParams& params, EvalReport& report) {
  std::vector<Eigen::VectorXd> xs;
  std::vector<std::uint32_t> ys;
  for (std::size_t i : train) {
    xs.push_back(ds.features[i]);
    ys.push_back(ds.labels[i]);
  }
  const LinearModel model = train_linear_ovr(xs, ys, params);
  RunResult run;
  run.test_subjects = std::move(test_subjects);
  for (std::size_t i : test) {
    const std::uint32_t predicted = predict(model, ds.features[i]).label;
    const auto row = std::lower_bound(report.classes.begin(), report.classes.end(), ds.labels[i]) - report.classes.begin();
    const auto col = std::lower_bound(report.classes.begin(), report.classes.end(), predicted) - report.classes.begin();
    ++report.confusion(row, col);
    run.correct += predicted == ds.labels[i] ? 1 : 0;
    ++run.total;
  }
  report.runs.push_back(std::move(run));
}

void finalize(EvalReport& report) {
  const std::uint64_t total = report.confusion.sum();
  report.accuracy = total == 0 ? 0.0 : static_cast<double>(report.confusion.trace()) / static_cast<double>(total);
  const auto n = static_cast<double>(report.runs.size());
  double sum = 0.0;
  for (const auto& r : report.runs) sum += r.accuracy();
  report.mean_accuracy = report.runs.empty() ? 0.0 : sum / n;
  double ss = 0.0;
  for (const auto& r : report.runs) ss += (r.accuracy() - report.mean_accuracy) * (r.accuracy() - report.mean_accuracy);
  report.stddev_accuracy = report.runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

EvalReport empty_report(const FeatureDataset& ds, std::string protocol) {
  EvalReport report;
  report.protocol = std::move(protocol);
  report.classes = sorted_unique(ds.labels);
  const auto c = static_cast<Eigen::Index>(report.classes.size());
  report.confusion = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(c, c);
  return report;
}

}  // namespace

LinearModel train_linear_ovr(const std::vector<Eigen::VectorXd>& features, const std::vector<std::uint32_t>& labels,
                             const LinearParams& params) {
  if (features.size() != labels.size()) throw Error("features and labels differ in length");
  if (features.empty()) throw TrainingError("no training samples");
  if (!(params.C > 0.0)) throw TrainingError("C must be positive");
  const auto dim = features.front().size();
  for (const auto& f : features) {
    if (f.size() != dim) throw DimensionMismatch("training features have inconsistent dimensions");
    if (!f.allFinite()) throw TrainingError("training features contain non-finite values");
  }
  LinearModel model;
  model.labels = sorted_unique(labels);
  if (model.labels.size() < 2) throw TrainingError("training needs at least two classes");
  model.params = params;
  const auto classes = model.labels.size();
  model.weights.resize(static_cast<Eigen::Index>(classes), dim);
  model.biases.resize(static_cast<Eigen::Index>(classes));
  model.objective_history.resize(classes);

  parallel_for(classes, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      std::vector<double> y(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == model.labels[c] ? 1.0 : -1.0;
      BinaryResult r = solve_binary(features, y, params, params.seed + c);
      model.weights.row(static_cast<Eigen::Index>(c)) = r.w.head(dim).transpose();
      model.biases[static_cast<Eigen::Index>(c)] = r.w[dim] * params.bias_term;
      model.objective_history[c] = std::move(r.objective);
    }
  });
  return model;
}

Prediction predict(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& feature) {
  if (static_cast<std::size_t>(feature.size()) != model.dim()) {
    throw DimensionMismatch("feature dimension " + std::to_string(feature.size()) + " != model dimension " +
                            std::to_string(model.dim()));
  }
  Prediction p;
  p.scores = model.weights * feature + model.biases;
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < p.scores.size(); ++c) {
    if (p.scores[c] > p.scores[best]) best = c;
  }
  p.label = model.labels[static_cast<std::size_t>(best)];
  return p;
}

double ovr_primal_objective(const LinearModel& model, std::size_t class_index,
                            const std::vector<Eigen::VectorXd>& features, const std::vector<std::uint32_t>& labels) {
  const auto c = static_cast<Eigen::Index>(class_index);
  const double bias_weight = model.biases[c] / model.params.bias_term;
  double loss = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double y = labels[i] == model.labels[class_index] ? 1.0 : -1.0;
    const double slack = std::max(0.0, 1.0 - y * (model.weights.row(c).dot(features[i]) + model.biases[c]));
    loss += slack * slack;
  }
  return 0.5 * (model.weights.row(c).squaredNorm() + bias_weight * bias_weight) + model.params.C * loss;
}

EvalReport evaluate_subject_split(const FeatureDataset& ds, std::size_t n_train_subjects, std::size_t n_runs,
                                  std::uint64_t seed, const LinearParams& params) {
  check_dataset(ds);
  const std::vector<std::uint32_t> subjects = sorted_unique(ds.subjects);
  if (n_train_subjects < 1 || subjects.size() < n_train_subjects + 1) {
    throw Error("subject split needs at least " + std::to_string(n_train_subjects + 1) + " subjects, dataset has " +
                std::to_string(subjects.size()));
  }
  if (n_runs < 1) throw Error("subject split needs at least one run");
  EvalReport report = empty_report(ds, "split");
  std::mt19937_64 rng(seed);
  for (std::size_t run = 0; run < n_runs; ++run) {
    std::vector<std::uint32_t> shuffled = subjects;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const std::set<std::uint32_t> train_set(shuffled.begin(),
                                            shuffled.begin() + static_cast<std::ptrdiff_t>(n_train_subjects));
    std::vector<std::uint32_t> test_subjects(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train_subjects),
                                             shuffled.end());
    std::sort(test_subjects.begin(), test_subjects.end());
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < ds.size(); ++i) (train_set.count(ds.subjects[i]) ? train : test).push_back(i);
    run_fold(ds, train, test, std::move(test_subjects), params, report);
  }
  finalize(report);
  return report;
}

EvalReport evaluate_loso(const FeatureDataset& ds, const LinearParams& params) {
  check_dataset(ds);
  const std::vector<std::uint32_t> subjects = sorted_unique(ds.subjects);
  if (subjects.size() < 2) throw Error("leave-one-subject-out needs at least two subjects");
  EvalReport report = empty_report(ds, "loso");
  for (std::uint32_t held_out : subjects) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < ds.size(); ++i) (ds.subjects[i] == held_out ? test : train).push_back(i);
    run_fold(ds, train, test, {held_out}, params, report);
  }
  finalize(report);
  return report;
}

}  // namespace mmk
