#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace mmk {

// Row-major pool of descriptors, one per row.
using DescriptorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KMeansParams {
  std::size_t centers = 1000;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double rel_tol = 1e-4;
  std::size_t sample_cap = 200000;
};

struct TrainMeta {
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  double inertia = 0.0;
  // Inertia after seeding, then after every Lloyd iteration.
  std::vector<double> inertia_history;
};

// D cluster centers, used both as the BoF dictionary and as the kernel basis.
class Codebook {
 public:
  explicit Codebook(DescriptorMatrix centers, TrainMeta meta = {});

  std::size_t size() const { return static_cast<std::size_t>(centers_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centers_.cols()); }
  const DescriptorMatrix& centers() const { return centers_; }
  auto center(std::size_t i) const { return centers_.row(static_cast<Eigen::Index>(i)); }
  const TrainMeta& meta() const { return meta_; }

 private:
  DescriptorMatrix centers_;
  TrainMeta meta_;
};

// k-means++ seeding followed by Lloyd iterations. Throws TrainingError when
// the pool holds fewer than params.centers distinct rows.
Codebook train_codebook(const DescriptorMatrix& pool, const KMeansParams& params);

// Index of the Euclidean-nearest center; exact ties go to the lowest index.
std::size_t quantize(const Eigen::Ref<const Eigen::VectorXd>& x, const Codebook& cb);

std::size_t count_distinct_rows(const DescriptorMatrix& pool);

}  // namespace mmk
