#include "mmk/matchkernel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mmk/error.hpp"
#include "mmk/parallel.hpp"

namespace mmk {

namespace {

constexpr std::size_t kMedianSampleCap = 1000;
constexpr double kInverseTolerance = 1e-6;
// Descriptors featurized per parallel batch; bounds the k_Z scratch matrix.
constexpr std::size_t kBatch = 4096;

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(got) + " != " +
                            std::to_string(want));
  }
}

// Rows k_Z(x)^T for descriptors [begin, end) of the video.
Eigen::MatrixXd kernel_rows(const VideoDescriptorSet& video, std::size_t begin, std::size_t end,
                            const KernelBasis& basis) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(basis.size()));
  parallel_for(end - begin, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      rows.row(static_cast<Eigen::Index>(i)) = basis.kernel_vector(video[begin + i].vec).transpose();
    }
  });
  return rows;
}

// Stable removal of exact duplicate rows.
DescriptorMatrix distinct_rows(const DescriptorMatrix& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto cmp = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(a, j) != m(b, j)) return m(a, j) < m(b, j) ? -1 : 1;
    }
    return 0;
  };
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return cmp(a, b) < 0; });
  std::vector<bool> keep(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || cmp(idx[i - 1], idx[i]) != 0) keep[static_cast<std::size_t>(idx[i])] = true;
  }
  DescriptorMatrix out(static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true)), m.cols());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.row(r++) = m.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace

double rbf(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y, double gamma) {
  check_dim(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(y.size()), "rbf");
  if (!(gamma > 0.0)) throw Error("rbf bandwidth must be positive");
  return std::exp(-gamma * (x - y).squaredNorm());
}

double median_gamma(const DescriptorMatrix& sample, std::uint64_t seed) {
  DescriptorMatrix points = distinct_rows(sample);
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw NumericalError("bandwidth undefined: fewer than two distinct descriptors");
  if (n > kMedianSampleCap) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> keep;
    std::mt19937_64 rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(keep), kMedianSampleCap, rng);
    DescriptorMatrix sub(static_cast<Eigen::Index>(keep.size()), points.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(keep[i]));
    points = std::move(sub);
  }
  std::vector<double> dists;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) dists.push_back((points.row(i) - points.row(j)).norm());
  }
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  double median = dists[mid];
  if (dists.size() % 2 == 0) {
    const double below = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + below);
  }
  return 1.0 / (2.0 * median * median);
}

Eigen::VectorXd KernelBasis::kernel_vector(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_dim(static_cast<std::size_t>(x.size()), dim(), "kernel basis");
  const auto& z = codebook_.centers();
  Eigen::VectorXd k(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) k[i] = std::exp(-gamma_ * (z.row(i).transpose() - x).squaredNorm());
  return k;
}

KernelBasis build_kernel_basis(const Codebook& cb, double gamma, std::optional<double> lambda) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw NumericalError("RBF bandwidth must be positive and finite");
  KernelBasis basis(cb);
  basis.gamma_ = gamma;
  const auto d = static_cast<Eigen::Index>(cb.size());
  const auto& z = cb.centers();
  basis.gram_.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    basis.gram_(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double k = std::exp(-gamma * (z.row(i) - z.row(j)).squaredNorm());
      basis.gram_(i, j) = k;
      basis.gram_(j, i) = k;
    }
  }
  if (!basis.gram_.allFinite()) throw NumericalError("kernel Gram matrix has non-finite entries");
  basis.lambda_ = lambda.value_or(kDefaultLambdaScale * basis.gram_.trace() / static_cast<double>(d));
  if (!(basis.lambda_ >= 0.0)) throw NumericalError("regularization must be non-negative");

  const Eigen::MatrixXd regularized = basis.gram_ + basis.lambda_ * Eigen::MatrixXd::Identity(d, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(regularized);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of K_ZZ failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double floor =
      std::max(basis.lambda_, std::numeric_limits<double>::epsilon() * std::max(values.maxCoeff(), 1.0));
  const Eigen::VectorXd inv_sqrt = values.cwiseMax(floor).cwiseSqrt().cwiseInverse();
  basis.whitening_ = inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  if (!basis.whitening_.allFinite()) throw NumericalError("whitening matrix has non-finite entries");

  const Eigen::MatrixXd product = basis.whitening_.transpose() * basis.whitening_ * regularized;
  basis.residual_ = (product - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  if (!(basis.residual_ <= kInverseTolerance)) {
    throw NumericalError("K_ZZ too ill-conditioned (inverse residual " + std::to_string(basis.residual_) +
                         "); increase lambda or gamma");
  }
  return basis;
}

Eigen::VectorXd phi(const Eigen::Ref<const Eigen::VectorXd>& x, const KernelBasis& basis) {
  return basis.whitening() * basis.kernel_vector(x);
}

Eigen::VectorXd voxel_feature(const VideoDescriptorSet& video, const std::vector<std::size_t>& group,
                              const KernelBasis& basis) {
  check_dim(video.descriptor_dim(), basis.dim(), "voxel feature");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
  if (group.empty()) return sum;
  for (std::size_t k : group) sum += basis.kernel_vector(video[k].vec);
  return basis.whitening() * sum / static_cast<double>(group.size());
}

std::size_t feature_map_dim(std::size_t basis_size, int levels) {
  const auto l = static_cast<std::size_t>(levels);
  const std::size_t tri = l * (l + 1) / 2;
  return basis_size * tri * tri;
}

VideoFeatureMap video_feature_map(const VideoDescriptorSet& video, const KernelBasis& basis,
                                  const PyramidConfig& pcfg) {
  check_dim(video.descriptor_dim(), basis.dim(), "video feature map");
  const auto dsize = static_cast<Eigen::Index>(basis.size());
  const std::size_t voxels = pyramid_voxel_count(pcfg.levels());

  // Column v accumulates sum k_Z(x) over the descriptors of pyramid voxel v.
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(dsize, static_cast<Eigen::Index>(voxels));
  std::vector<std::size_t> counts(voxels, 0);
  std::vector<std::size_t> slots(static_cast<std::size_t>(pcfg.levels()));
  for (std::size_t begin = 0; begin < video.size(); begin += kBatch) {
    const std::size_t end = std::min(video.size(), begin + kBatch);
    const Eigen::MatrixXd rows = kernel_rows(video, begin, end, basis);
    for (std::size_t k = begin; k < end; ++k) {
      for (int level = 1; level <= pcfg.levels(); ++level) {
        const std::size_t v = pyramid_level_offset(level) + voxel_index(video[k].loc, level);
        sums.col(static_cast<Eigen::Index>(v)) += rows.row(static_cast<Eigen::Index>(k - begin)).transpose();
        ++counts[v];
      }
    }
  }

  VideoFeatureMap out;
  out.levels = pcfg.levels();
  out.basis_size = basis.size();
  out.weights = pcfg.weights();
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(feature_map_dim(basis.size(), pcfg.levels())));
  const Eigen::MatrixXd mapped = basis.whitening() * sums;
  for (int level = 1; level <= pcfg.levels(); ++level) {
    const std::size_t offset = pyramid_level_offset(level);
    const std::size_t cells = static_cast<std::size_t>(level) * level * level;
    for (std::size_t j = 0; j < cells; ++j) {
      const std::size_t v = offset + j;
      if (counts[v] == 0) continue;
      out.values.segment(static_cast<Eigen::Index>(v) * dsize, dsize) =
          pcfg.weight(level) * mapped.col(static_cast<Eigen::Index>(v)) / static_cast<double>(counts[v]);
    }
  }
  return out;
}

double match_kernel_exact(const VideoDescriptorSet& x, const VideoDescriptorSet& y, const PyramidConfig& pcfg,
                          const PairKernel& k) {
  check_dim(x.descriptor_dim(), y.descriptor_dim(), "match kernel");
  const PyramidPartition px = partition(x, pcfg.levels());
  const PyramidPartition py = partition(y, pcfg.levels());
  double total = 0.0;
  for (int level = 1; level <= pcfg.levels(); ++level) {
    const double w = pcfg.weight(level);
    const std::size_t cells = static_cast<std::size_t>(level) * level * level;
    for (std::size_t j = 0; j < cells; ++j) {
      const auto& gx = px.group(level, j);
      const auto& gy = py.group(level, j);
      if (gx.empty() || gy.empty()) continue;
      double s = 0.0;
      for (std::size_t a : gx) {
        for (std::size_t b : gy) s += k(a, b);
      }
      total += (w * w) * (s / (static_cast<double>(gx.size()) * static_cast<double>(gy.size())));
    }
  }
  return total;
}

double mmk_exact(const VideoDescriptorSet& x, const VideoDescriptorSet& y, const KernelBasis& basis,
                 const PyramidConfig& pcfg) {
  check_dim(x.descriptor_dim(), basis.dim(), "mmk_exact");
  check_dim(y.descriptor_dim(), basis.dim(), "mmk_exact");
  const auto d = static_cast<Eigen::Index>(basis.size());
  const Eigen::MatrixXd regularized = basis.gram() + basis.lambda() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::LDLT<Eigen::MatrixXd> solver(regularized);
  if (solver.info() != Eigen::Success) throw NumericalError("LDL^T factorization of K_ZZ failed");

  const Eigen::MatrixXd kx = kernel_rows(x, 0, x.size(), basis);
  const Eigen::MatrixXd ky = kernel_rows(y, 0, y.size(), basis);
  const Eigen::MatrixXd solved = solver.solve(ky.transpose());  // D x m_y
  return match_kernel_exact(x, y, pcfg, [&](std::size_t a, std::size_t b) {
    return kx.row(static_cast<Eigen::Index>(a)).dot(solved.col(static_cast<Eigen::Index>(b)));
  });
}

int delta(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
          const Codebook& cb) {
  return quantize(x, cb) == quantize(y, cb) ? 1 : 0;
}

Eigen::VectorXd BofHistogram::values() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(counts.size()));
  if (total == 0) return v;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return v;
}

BofHistogram bof_histogram(const VideoDescriptorSet& video, const std::vector<std::size_t>& group,
                           const Codebook& cb) {
  BofHistogram h;
  h.counts.assign(cb.size(), 0);
  for (std::size_t k : group) ++h.counts[quantize(video[k].vec, cb)];
  h.total = group.size();
  return h;
}

BofHistogram bof_histogram(const VideoDescriptorSet& video, const Codebook& cb) {
  std::vector<std::size_t> all(video.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return bof_histogram(video, all, cb);
}

double bof_kernel(const BofHistogram& a, const BofHistogram& b) {
  check_dim(a.counts.size(), b.counts.size(), "bof kernel");
  if (a.total == 0 || b.total == 0) return 0.0;
  // Integer matches are exact in double well past any realistic descriptor count.
  double matches = 0.0;
  for (std::size_t i = 0; i < a.counts.size(); ++i) {
    matches += static_cast<double>(a.counts[i]) * static_cast<double>(b.counts[i]);
  }
  return matches / (static_cast<double>(a.total) * static_cast<double>(b.total));
}

VideoFeatureMap bof_feature_map(const VideoDescriptorSet& video, const Codebook& cb, const PyramidConfig& pcfg) {
  check_dim(video.descriptor_dim(), cb.dim(), "bof feature map");
  const PyramidPartition parts = partition(video, pcfg.levels());
  const auto dsize = static_cast<Eigen::Index>(cb.size());
  VideoFeatureMap out;
  out.levels = pcfg.levels();
  out.basis_size = cb.size();
  out.weights = pcfg.weights();
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(feature_map_dim(cb.size(), pcfg.levels())));
  for (int level = 1; level <= pcfg.levels(); ++level) {
    const std::size_t offset = pyramid_level_offset(level);
    const std::size_t cells = static_cast<std::size_t>(level) * level * level;
    for (std::size_t j = 0; j < cells; ++j) {
      const auto& group = parts.group(level, j);
      if (group.empty()) continue;
      out.values.segment(static_cast<Eigen::Index>(offset + j) * dsize, dsize) =
          pcfg.weight(level) * bof_histogram(video, group, cb).values();
    }
  }
  return out;
}

}  // namespace mmk
