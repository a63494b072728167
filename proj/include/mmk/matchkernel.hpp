#pragma once

// Multiresolution match kernels: the RBF base kernel, the whitened kernel
// basis, explicit per-descriptor and per-video feature maps, the BoF baseline
// and direct double-sum kernel evaluation for verification.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mmk/codebook.hpp"
#include "mmk/core.hpp"

namespace mmk {

double rbf(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y, double gamma);

// 1 / (2 * median^2), median over pairwise distances between the distinct rows
// of `sample` (a seeded subset of at most 1000 of them). Duplicated rows never
// change the result.
double median_gamma(const DescriptorMatrix& sample, std::uint64_t seed = 0);

// Regularization used when none is given: 1e-8 * trace(K_ZZ) / D.
inline constexpr double kDefaultLambdaScale = 1e-8;

// Codebook centers Z, their RBF Gram matrix K_ZZ and a whitening matrix G
// with G^T G = (K_ZZ + lambda I)^-1, computed as Lambda^-1/2 U^T from the
// symmetric eigendecomposition.
class KernelBasis {
 public:
  const Codebook& codebook() const { return codebook_; }
  std::size_t size() const { return codebook_.size(); }
  std::size_t dim() const { return codebook_.dim(); }
  double gamma() const { return gamma_; }
  double lambda() const { return lambda_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::MatrixXd& whitening() const { return whitening_; }
  // max |G^T G (K_ZZ + lambda I) - I| measured at construction.
  double inverse_residual() const { return residual_; }

  // k_Z(x): RBF similarity to every center.
  Eigen::VectorXd kernel_vector(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  friend KernelBasis build_kernel_basis(const Codebook&, double, std::optional<double>);
  explicit KernelBasis(Codebook cb) : codebook_(std::move(cb)) {}

  Codebook codebook_;
  double gamma_ = 1.0;
  double lambda_ = 0.0;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd whitening_;
  double residual_ = 0.0;
};

// Throws NumericalError when K_ZZ is non-finite or too ill-conditioned for the
// whitening to reproduce the inverse within 1e-6.
KernelBasis build_kernel_basis(const Codebook& cb, double gamma, std::optional<double> lambda = std::nullopt);

// phi(x) = G k_Z(x).
Eigen::VectorXd phi(const Eigen::Ref<const Eigen::VectorXd>& x, const KernelBasis& basis);

// Mean of phi over the given descriptors of `video`; zero for an empty group.
Eigen::VectorXd voxel_feature(const VideoDescriptorSet& video, const std::vector<std::size_t>& group,
                              const KernelBasis& basis);

struct VideoFeatureMap {
  Eigen::VectorXd values;
  int levels = 1;
  std::size_t basis_size = 0;
  std::vector<double> weights;
};

// D * [L(L+1)/2]^2, the concatenated length of every pyramid voxel block.
std::size_t feature_map_dim(std::size_t basis_size, int levels);

// Blocks w_i * mean_phi(X^{i,j}) concatenated in (level, voxel) order, so
// that dot products give sum_i sum_j w_i^2 k_ij(X, Y).
VideoFeatureMap video_feature_map(const VideoDescriptorSet& video, const KernelBasis& basis,
                                  const PyramidConfig& pcfg);

// Kernel between descriptor `i` of X and descriptor `j` of Y.
using PairKernel = std::function<double(std::size_t, std::size_t)>;

// sum_i w_i^2 sum_j (1 / |X^ij||Y^ij|) sum_{x in X^ij} sum_{y in Y^ij} k(x, y),
// by direct enumeration of pairs. Voxels empty on either side contribute 0.
double match_kernel_exact(const VideoDescriptorSet& x, const VideoDescriptorSet& y, const PyramidConfig& pcfg,
                          const PairKernel& k);

// match_kernel_exact with k(x,y) = k_Z(x)^T (K_ZZ + lambda I)^-1 k_Z(y),
// solved by LDL^T factorization rather than through G.
double mmk_exact(const VideoDescriptorSet& x, const VideoDescriptorSet& y, const KernelBasis& basis,
                 const PyramidConfig& pcfg);

// 1 iff x and y quantize to the same codeword.
int delta(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
          const Codebook& cb);

// Codeword counts of a descriptor set; values() is the normalized histogram.
struct BofHistogram {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  Eigen::VectorXd values() const;
};

BofHistogram bof_histogram(const VideoDescriptorSet& video, const Codebook& cb);
BofHistogram bof_histogram(const VideoDescriptorSet& video, const std::vector<std::size_t>& group,
                           const Codebook& cb);

// Dot product of the normalized histograms, evaluated from the integer counts.
double bof_kernel(const BofHistogram& a, const BofHistogram& b);

// Pyramid of weighted voxel histograms, same layout as video_feature_map. With
// one level and unit weight this is the plain BoF vector.
VideoFeatureMap bof_feature_map(const VideoDescriptorSet& video, const Codebook& cb, const PyramidConfig& pcfg);

}  // namespace mmk
