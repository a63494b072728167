#pragma once

// Spatio-temporal pyramid geometry: normalized locations, voxel indexing and
// the per-level ordered partition of a video's descriptors.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mmk {

struct VideoDims {
  std::uint32_t width = 1;
  std::uint32_t height = 1;
  std::uint32_t frames = 1;

  VideoDims() = default;
  VideoDims(std::uint32_t w, std::uint32_t h, std::uint32_t t);

  bool operator==(const VideoDims&) const = default;
};

// A point of the unit cube [0,1)^3; u follows x, v follows y, w follows time.
struct Location {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;

  bool operator==(const Location&) const = default;
};

// Largest double strictly below 1.
inline constexpr double kBelowOne = 1.0 - 0x1p-53;

Location normalize_location(double x, double y, double t, const VideoDims& dims);

struct LocatedDescriptor {
  Location loc;
  Eigen::VectorXd vec;
};

struct VideoMeta {
  std::string video_id;
  std::uint32_t subject = 0;
  std::optional<std::uint32_t> label;
};

class VideoDescriptorSet {
 public:
  VideoDescriptorSet(VideoDims dims, std::size_t descriptor_dim, VideoMeta meta = {});

  // Throws DimensionMismatch if d.vec has the wrong length and FormatError on
  // non-finite entries.
  void add(LocatedDescriptor d);

  const VideoDims& dims() const { return dims_; }
  std::size_t descriptor_dim() const { return dim_; }
  std::size_t size() const { return descriptors_.size(); }
  bool empty() const { return descriptors_.empty(); }
  const std::vector<LocatedDescriptor>& descriptors() const { return descriptors_; }
  const LocatedDescriptor& operator[](std::size_t i) const { return descriptors_[i]; }
  const VideoMeta& meta() const { return meta_; }
  VideoMeta& meta() { return meta_; }

 private:
  VideoDims dims_;
  std::size_t dim_;
  VideoMeta meta_;
  std::vector<LocatedDescriptor> descriptors_;
};

// Level count and per-level feature-map scale. Level i (1-based) holds i^3
// voxels; its feature blocks are multiplied by weights[i-1], so the induced
// kernel carries weights[i-1]^2.
class PyramidConfig {
 public:
  PyramidConfig(int levels, std::vector<double> weights);

  // w_i = 2^i, the literal reading of the finer-is-heavier level weighting.
  static PyramidConfig with_default_weights(int levels);
  // w_i = 1 for all levels.
  static PyramidConfig unweighted(int levels);

  int levels() const { return levels_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(int level) const { return weights_.at(static_cast<std::size_t>(level - 1)); }

 private:
  int levels_;
  std::vector<double> weights_;
};

// Voxel id in [0, level^3), x-major: j = cx*level^2 + cy*level + ct.
std::size_t voxel_index(const Location& loc, int level);

// Sum of i^3 for i = 1..levels.
std::size_t pyramid_voxel_count(int levels);

// Offset of level `level`'s first voxel in the concatenated pyramid order.
std::size_t pyramid_level_offset(int level);

// Groups of descriptor indices in (level, voxel) order. groups()[k] for the
// flat pyramid position k = pyramid_level_offset(i) + j.
class PyramidPartition {
 public:
  int levels() const { return levels_; }
  std::size_t group_count() const { return groups_.size(); }
  const std::vector<std::size_t>& group(int level, std::size_t voxel) const;
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }

 private:
  friend PyramidPartition partition(const VideoDescriptorSet&, int);
  int levels_ = 0;
  std::vector<std::vector<std::size_t>> groups_;
};

PyramidPartition partition(const VideoDescriptorSet& video, int levels);

}  // namespace mmk
