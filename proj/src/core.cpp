#include "mmk/core.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mmk/error.hpp"

namespace mmk {

VideoDims::VideoDims(std::uint32_t w, std::uint32_t h, std::uint32_t t)
    : width(w), height(h), frames(t) {
  if (w == 0 || h == 0 || t == 0) {
    throw FormatError("video dimensions must be strictly positive");
  }
}

Location normalize_location(double x, double y, double t, const VideoDims& dims) {
  if (!(x >= 0.0) || !(y >= 0.0) || !(t >= 0.0)) {
    throw InvalidLocation("negative or non-finite location (" + std::to_string(x) + ", " +
                          std::to_string(y) + ", " + std::to_string(t) + ")");
  }
  auto unit = [](double c, std::uint32_t extent) {
    return std::min(c / static_cast<double>(extent), kBelowOne);
  };
  return {unit(x, dims.width), unit(y, dims.height), unit(t, dims.frames)};
}

VideoDescriptorSet::VideoDescriptorSet(VideoDims dims, std::size_t descriptor_dim, VideoMeta meta)
    : dims_(dims), dim_(descriptor_dim), meta_(std::move(meta)) {}

void VideoDescriptorSet::add(LocatedDescriptor d) {
  if (static_cast<std::size_t>(d.vec.size()) != dim_) {
    throw DimensionMismatch("descriptor has dimension " + std::to_string(d.vec.size()) +
                            ", set expects " + std::to_string(dim_));
  }
  if (!d.vec.allFinite()) throw FormatError("descriptor contains non-finite values");
  const auto in_unit = [](double c) { return c >= 0.0 && c < 1.0; };
  if (!in_unit(d.loc.u) || !in_unit(d.loc.v) || !in_unit(d.loc.w)) {
    throw InvalidLocation("descriptor location outside the unit cube");
  }
  descriptors_.push_back(std::move(d));
}

PyramidConfig::PyramidConfig(int levels, std::vector<double> weights)
    : levels_(levels), weights_(std::move(weights)) {
  if (levels_ < 1) throw Error("pyramid needs at least one level");
  if (weights_.size() != static_cast<std::size_t>(levels_)) {
    throw Error("pyramid has " + std::to_string(levels_) + " levels but " +
                std::to_string(weights_.size()) + " weights");
  }
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("pyramid weights must be positive and finite");
  }
}

PyramidConfig PyramidConfig::with_default_weights(int levels) {
  std::vector<double> w;
  for (int i = 1; i <= levels; ++i) w.push_back(std::ldexp(1.0, i));
  return {levels, std::move(w)};
}

PyramidConfig PyramidConfig::unweighted(int levels) {
  return {levels, std::vector<double>(static_cast<std::size_t>(std::max(levels, 0)), 1.0)};
}

std::size_t voxel_index(const Location& loc, int level) {
  const auto cell = [level](double c) {
    const auto k = static_cast<long>(std::floor(c * level));
    return static_cast<std::size_t>(std::clamp<long>(k, 0, level - 1));
  };
  const auto n = static_cast<std::size_t>(level);
  return cell(loc.u) * n * n + cell(loc.v) * n + cell(loc.w);
}

std::size_t pyramid_voxel_count(int levels) {
  std::size_t total = 0;
  for (std::size_t i = 1; i <= static_cast<std::size_t>(levels); ++i) total += i * i * i;
  return total;
}

std::size_t pyramid_level_offset(int level) { return pyramid_voxel_count(level - 1); }

const std::vector<std::size_t>& PyramidPartition::group(int level, std::size_t voxel) const {
  return groups_.at(pyramid_level_offset(level) + voxel);
}

PyramidPartition partition(const VideoDescriptorSet& video, int levels) {
  if (levels < 1) throw Error("pyramid needs at least one level");
  PyramidPartition p;
  p.levels_ = levels;
  p.groups_.resize(pyramid_voxel_count(levels));
  for (int i = 1; i <= levels; ++i) {
    const std::size_t offset = pyramid_level_offset(i);
    for (std::size_t k = 0; k < video.size(); ++k) {
      p.groups_[offset + voxel_index(video[k].loc, i)].push_back(k);
    }
  }
  return p;
}

}  // namespace mmk
