#include "mmk/codebook.hpp"

#include <algorithm>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "mmk/error.hpp"
#include "mmk/parallel.hpp"

namespace mmk {

namespace {

struct Assignment {
  std::vector<std::size_t> label;
  std::vector<double> dist2;
  double inertia = 0.0;
};

double nearest(const Eigen::Ref<const Eigen::RowVectorXd>& x, const DescriptorMatrix& centers,
               std::size_t* index) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d2 = (centers.row(c) - x).squaredNorm();
    if (d2 < best) {
      best = d2;
      best_i = static_cast<std::size_t>(c);
    }
  }
  if (index) *index = best_i;
  return best;
}

Assignment assign(const DescriptorMatrix& pool, const DescriptorMatrix& centers) {
  const auto n = static_cast<std::size_t>(pool.rows());
  Assignment a;
  a.label.resize(n);
  a.dist2.resize(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      a.dist2[i] = nearest(pool.row(static_cast<Eigen::Index>(i)), centers, &a.label[i]);
    }
  });
  // Sequential sum keeps the inertia independent of the worker count.
  for (double d : a.dist2) a.inertia += d;
  return a;
}

DescriptorMatrix seed_plus_plus(const DescriptorMatrix& pool, std::size_t k, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(pool.rows());
  DescriptorMatrix centers(static_cast<Eigen::Index>(k), pool.cols());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centers.row(0) = pool.row(static_cast<Eigen::Index>(first(rng)));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = (pool.row(static_cast<Eigen::Index>(i)) - centers.row(0)).squaredNorm();
  }
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double run = 0.0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        run += d2[i];
        pick = i;
        if (run > target) break;
      }
    }
    centers.row(static_cast<Eigen::Index>(c)) = pool.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      const double dn =
          (pool.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
      d2[i] = std::min(d2[i], dn);
    }
  }
  return centers;
}

// Moves each center to the mean of its points. An empty cluster takes the
// point currently farthest from its own center.
void update_centers(const DescriptorMatrix& pool, const Assignment& a, DescriptorMatrix& centers) {
  const auto k = static_cast<std::size_t>(centers.rows());
  DescriptorMatrix sums = DescriptorMatrix::Zero(centers.rows(), centers.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < a.label.size(); ++i) {
    sums.row(static_cast<Eigen::Index>(a.label[i])) += pool.row(static_cast<Eigen::Index>(i));
    ++counts[a.label[i]];
  }
  std::vector<double> spare = a.dist2;
  for (std::size_t c = 0; c < k; ++c) {
    const auto row = static_cast<Eigen::Index>(c);
    if (counts[c] > 0) {
      centers.row(row) = sums.row(row) / static_cast<double>(counts[c]);
      continue;
    }
    const auto far = static_cast<std::size_t>(std::max_element(spare.begin(), spare.end()) - spare.begin());
    centers.row(row) = pool.row(static_cast<Eigen::Index>(far));
    spare[far] = -1.0;
  }
}

DescriptorMatrix subsample(const DescriptorMatrix& pool, std::size_t cap, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(pool.rows());
  if (n <= cap) return pool;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> keep;
  keep.reserve(cap);
  std::sample(all.begin(), all.end(), std::back_inserter(keep), cap, rng);
  DescriptorMatrix out(static_cast<Eigen::Index>(cap), pool.cols());
  for (std::size_t i = 0; i < cap; ++i) out.row(static_cast<Eigen::Index>(i)) = pool.row(static_cast<Eigen::Index>(keep[i]));
  return out;
}

}  // namespace

Codebook::Codebook(DescriptorMatrix centers, TrainMeta meta) : centers_(std::move(centers)), meta_(std::move(meta)) {
  if (centers_.rows() < 1) throw Error("codebook needs at least one center");
  if (!centers_.allFinite()) throw FormatError("codebook centers contain non-finite values");
}

std::size_t count_distinct_rows(const DescriptorMatrix& pool) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < pool.cols(); ++j) {
      if (pool(a, j) != pool(b, j)) return pool(a, j) < pool(b, j);
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  std::size_t distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (less(idx[i - 1], idx[i])) ++distinct;
  }
  return distinct;
}

Codebook train_codebook(const DescriptorMatrix& input, const KMeansParams& params) {
  if (params.centers < 1) throw TrainingError("codebook size must be >= 1");
  if (params.max_iters < 1) throw TrainingError("k-means needs max_iters >= 1");
  if (!(params.rel_tol > 0.0)) throw TrainingError("k-means rel_tol must be positive");
  if (!input.allFinite()) throw TrainingError("training descriptors contain non-finite values");

  std::mt19937_64 rng(params.seed);
  const DescriptorMatrix pool = subsample(input, std::max<std::size_t>(params.sample_cap, 1), rng);
  const std::size_t distinct = count_distinct_rows(pool);
  if (distinct < params.centers) {
    throw TrainingError("need at least " + std::to_string(params.centers) + " distinct descriptors, found " +
                        std::to_string(distinct));
  }

  DescriptorMatrix centers = seed_plus_plus(pool, params.centers, rng);
  Assignment a = assign(pool, centers);
  TrainMeta meta;
  meta.seed = params.seed;
  meta.inertia_history.push_back(a.inertia);
  for (std::size_t iter = 1; iter <= params.max_iters && a.inertia > 0.0; ++iter) {
    const double previous = a.inertia;
    DescriptorMatrix updated = centers;
    update_centers(pool, a, updated);
    Assignment next = assign(pool, updated);
    // Rounding in the mean update can cost a few ulps once converged.
    if (next.inertia > previous) break;
    centers = std::move(updated);
    a = std::move(next);
    meta.iterations = iter;
    meta.inertia_history.push_back(a.inertia);
    if (previous - a.inertia < params.rel_tol * previous) break;
  }
  meta.inertia = a.inertia;
  return Codebook(std::move(centers), std::move(meta));
}

std::size_t quantize(const Eigen::Ref<const Eigen::VectorXd>& x, const Codebook& cb) {
  if (static_cast<std::size_t>(x.size()) != cb.dim()) {
    throw DimensionMismatch("descriptor dimension " + std::to_string(x.size()) + " != codebook dimension " +
                            std::to_string(cb.dim()));
  }
  std::size_t index = 0;
  nearest(x.transpose(), cb.centers(), &index);
  return index;
}

}  // namespace mmk
