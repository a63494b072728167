#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "mmk/core.hpp"

namespace mmk {

// Single-channel image with intensities in [0,1], row-major.
struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(std::uint32_t w, std::uint32_t h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  double& at(std::uint32_t x, std::uint32_t y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(std::uint32_t x, std::uint32_t y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  // Nearest-edge replication outside the image.
  double clamped(long x, long y) const;
};

// Binary PGM (P5), 8 or 16 bit. Intensities are divided by the declared maxval.
GrayImage read_pgm(const std::filesystem::path& path);
// Writes 16-bit when maxval > 255. Values are clamped to [0,1] and rounded.
void write_pgm(const std::filesystem::path& path, const GrayImage& img, std::uint16_t maxval = 255);

class DepthVideo {
 public:
  explicit DepthVideo(std::vector<GrayImage> frames);

  const VideoDims& dims() const { return dims_; }
  const GrayImage& frame(std::size_t t) const { return frames_[t]; }
  const std::vector<GrayImage>& frames() const { return frames_; }

 private:
  VideoDims dims_;
  std::vector<GrayImage> frames_;
};

// Reads every *.pgm in `dir`, sorted by filename.
DepthVideo load_frames(const std::filesystem::path& dir);

struct InterestPoint {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t t = 0;
  double score = 0.0;

  bool operator==(const InterestPoint&) const = default;
};

struct DenseGrid {
  std::uint32_t stride = 8;
};

// The k strongest responses of |frame_t - frame_{t-1}| after 3x3 mean
// smoothing, for t >= 1.
struct TemporalDiff {
  std::size_t top_k = 200;
};

std::vector<InterestPoint> detect_interest_points(const DepthVideo& video, const DenseGrid& mode);
std::vector<InterestPoint> detect_interest_points(const DepthVideo& video, const TemporalDiff& mode);

inline constexpr int kPatchSize = 16;
inline constexpr std::size_t kHogBins = 36;
inline constexpr std::size_t kLbpBins = 59;

struct Patch {
  std::array<double, kPatchSize * kPatchSize> values{};

  double& at(int x, int y) { return values[static_cast<std::size_t>(y * kPatchSize + x)]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y * kPatchSize + x)]; }
};

// 16x16 window with top-left corner at (x-8, y-8); borders clamp.
Patch extract_patch(const DepthVideo& video, const InterestPoint& p);

// 36-bin orientation histogram over the 14x14 interior. Each pixel's gradient
// magnitude is split linearly between the two nearest 10-degree bin centers.
Eigen::VectorXd hog_descriptor(const Patch& patch);

// Uniform LBP histogram (58 uniform patterns + 1 catch-all) over the 14x14
// interior; neighbor >= center sets the bit, bits clockwise from top-left.
Eigen::VectorXd lbp_descriptor(const Patch& patch);

// 8-bit pattern of interior pixel (x, y); bit k is the k-th neighbor clockwise
// from the top-left.
std::uint8_t lbp_pattern(const Patch& patch, int x, int y);
// Bin for a pattern: 0..57 for uniform patterns in ascending value, 58 otherwise.
std::size_t lbp_uniform_bin(std::uint8_t pattern);

enum class DescriptorKind { Hog, Lbp };

// Descriptors at every interest point, located in the normalized unit cube.
VideoDescriptorSet describe(const DepthVideo& video, const std::vector<InterestPoint>& points,
                            DescriptorKind kind, VideoMeta meta = {});

// Reads an MMKD descriptor file and normalizes its locations.
VideoDescriptorSet load_precomputed_descriptors(const std::filesystem::path& path, VideoMeta meta = {});

}  // namespace mmk
