#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mmk {

struct LinearParams {
  double C = 1.0;
  std::size_t max_epochs = 1000;
  // Stop once every projected dual gradient is within eps of zero.
  double eps = 1e-5;
  std::uint64_t seed = 0;
  // Constant appended to each feature; its weight is the (regularized) bias.
  double bias_term = 1.0;
};

// One-vs-rest L2-regularized squared-hinge linear classifier.
struct LinearModel {
  std::vector<std::uint32_t> labels;  // ascending; row c of weights scores labels[c]
  Eigen::MatrixXd weights;            // classes x dim
  Eigen::VectorXd biases;
  LinearParams params;
  // Dual objective after each epoch, per class. Not persisted.
  std::vector<std::vector<double>> objective_history;

  std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }
};

LinearModel train_linear_ovr(const std::vector<Eigen::VectorXd>& features, const std::vector<std::uint32_t>& labels,
                             const LinearParams& params = {});

struct Prediction {
  std::uint32_t label = 0;
  Eigen::VectorXd scores;
};

// argmax of w_c^T f + b_c; ties go to the lowest class index.
Prediction predict(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& feature);

// Primal objective (1/2)|w|^2 + C sum max(0, 1 - y (w^T f + b))^2 of one class.
double ovr_primal_objective(const LinearModel& model, std::size_t class_index,
                            const std::vector<Eigen::VectorXd>& features, const std::vector<std::uint32_t>& labels);

struct FeatureDataset {
  std::vector<Eigen::VectorXd> features;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint32_t> subjects;

  std::size_t size() const { return features.size(); }
};

struct RunResult {
  std::vector<std::uint32_t> test_subjects;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct EvalReport {
  std::string protocol;
  std::vector<std::uint32_t> classes;  // every label in the dataset, ascending
  // confusion(true, predicted) counts, pooled over all runs or folds.
  Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic> confusion;
  std::vector<RunResult> runs;
  double accuracy = 0.0;  // trace(confusion) / total
  double mean_accuracy = 0.0;
  double stddev_accuracy = 0.0;  // sample standard deviation over runs
};

// n_runs random subject splits: n_train_subjects train, the rest test.
EvalReport evaluate_subject_split(const FeatureDataset& ds, std::size_t n_train_subjects, std::size_t n_runs,
                                  std::uint64_t seed, const LinearParams& params = {});

// One fold per subject, in ascending subject order.
EvalReport evaluate_loso(const FeatureDataset& ds, const LinearParams& params = {});

}  // namespace mmk
