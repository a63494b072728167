#include "mmk/descriptors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <tuple>

#include "mmk/error.hpp"
#include "mmk/io.hpp"
#include "mmk/parallel.hpp"

namespace mmk {

namespace {

// Clockwise from the top-left neighbor.
constexpr std::array<std::pair<int, int>, 8> kNeighbors{{
    {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}};

int circular_transitions(std::uint8_t pattern) {
  const auto rotated = static_cast<std::uint8_t>((pattern >> 1) | (pattern << 7));
  return std::popcount(static_cast<std::uint8_t>(pattern ^ rotated));
}

std::array<std::uint8_t, 256> build_uniform_table() {
  std::array<std::uint8_t, 256> table{};
  std::uint8_t next = 0;
  for (unsigned p = 0; p < 256; ++p) {
    table[p] = circular_transitions(static_cast<std::uint8_t>(p)) <= 2 ? next++ : 58;
  }
  return table;
}

GrayImage smoothed_abs_diff(const GrayImage& cur, const GrayImage& prev) {
  GrayImage diff(cur.width, cur.height);
  for (std::size_t i = 0; i < diff.pixels.size(); ++i) {
    diff.pixels[i] = std::abs(cur.pixels[i] - prev.pixels[i]);
  }
  GrayImage out(cur.width, cur.height);
  for (std::uint32_t y = 0; y < cur.height; ++y) {
    for (std::uint32_t x = 0; x < cur.width; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) s += diff.clamped(long{x} + dx, long{y} + dy);
      }
      out.at(x, y) = s / 9.0;
    }
  }
  return out;
}

}  // namespace

DepthVideo::DepthVideo(std::vector<GrayImage> frames) : frames_(std::move(frames)) {
  if (frames_.empty()) throw IngestionError("video has no frames");
  const auto w = frames_.front().width;
  const auto h = frames_.front().height;
  for (const auto& f : frames_) {
    if (f.width != w || f.height != h) {
      throw FormatError("inconsistent frame sizes: " + std::to_string(w) + "x" + std::to_string(h) +
                        " vs " + std::to_string(f.width) + "x" + std::to_string(f.height));
    }
  }
  dims_ = VideoDims(w, h, static_cast<std::uint32_t>(frames_.size()));
}

DepthVideo load_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IngestionError("frame directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  if (files.empty()) throw IngestionError("no .pgm frames in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  std::vector<GrayImage> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_pgm(f));
  try {
    return DepthVideo(std::move(frames));
  } catch (const FormatError& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
}

std::vector<InterestPoint> detect_interest_points(const DepthVideo& video, const DenseGrid& mode) {
  if (mode.stride == 0) throw Error("dense-grid stride must be >= 1");
  const auto& d = video.dims();
  std::vector<InterestPoint> points;
  for (std::uint32_t t = 0; t < d.frames; ++t) {
    for (std::uint32_t y = 0; y < d.height; y += mode.stride) {
      for (std::uint32_t x = 0; x < d.width; x += mode.stride) points.push_back({x, y, t, 0.0});
    }
  }
  return points;
}

std::vector<InterestPoint> detect_interest_points(const DepthVideo& video, const TemporalDiff& mode) {
  if (mode.top_k == 0) throw Error("temporal-diff top-k must be >= 1");
  const auto& d = video.dims();
  std::vector<InterestPoint> candidates;
  candidates.reserve(static_cast<std::size_t>(d.width) * d.height * (d.frames > 0 ? d.frames - 1 : 0));
  for (std::uint32_t t = 1; t < d.frames; ++t) {
    const GrayImage response = smoothed_abs_diff(video.frame(t), video.frame(t - 1));
    for (std::uint32_t y = 0; y < d.height; ++y) {
      for (std::uint32_t x = 0; x < d.width; ++x) candidates.push_back({x, y, t, response.at(x, y)});
    }
  }
  const auto stronger = [](const InterestPoint& a, const InterestPoint& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.t, a.y, a.x) < std::tie(b.t, b.y, b.x);
  };
  const std::size_t k = std::min(mode.top_k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(), stronger);
  candidates.resize(k);
  return candidates;
}

Patch extract_patch(const DepthVideo& video, const InterestPoint& p) {
  const auto& d = video.dims();
  if (p.x >= d.width || p.y >= d.height || p.t >= d.frames) {
    throw InvalidLocation("interest point outside the video");
  }
  const GrayImage& frame = video.frame(p.t);
  Patch patch;
  const long x0 = static_cast<long>(p.x) - kPatchSize / 2;
  const long y0 = static_cast<long>(p.y) - kPatchSize / 2;
  for (int y = 0; y < kPatchSize; ++y) {
    for (int x = 0; x < kPatchSize; ++x) patch.at(x, y) = frame.clamped(x0 + x, y0 + y);
  }
  return patch;
}

Eigen::VectorXd hog_descriptor(const Patch& patch) {
  constexpr double kBinWidth = 360.0 / kHogBins;
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(kHogBins);
  for (int y = 1; y < kPatchSize - 1; ++y) {
    for (int x = 1; x < kPatchSize - 1; ++x) {
      const double gx = patch.at(x + 1, y) - patch.at(x - 1, y);
      const double gy = patch.at(x, y + 1) - patch.at(x, y - 1);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx) * (180.0 / std::numbers::pi);
      if (theta < 0.0) theta += 360.0;
      if (theta >= 360.0) theta -= 360.0;
      // Bin k is centered at (k + 0.5) * width.
      const double pos = theta / kBinWidth - 0.5;
      const double lower = std::floor(pos);
      const double frac = pos - lower;
      const auto lo = static_cast<std::size_t>((static_cast<long>(lower) + kHogBins) % kHogBins);
      const auto hi = (lo + 1) % kHogBins;
      hist[static_cast<Eigen::Index>(lo)] += mag * (1.0 - frac);
      hist[static_cast<Eigen::Index>(hi)] += mag * frac;
    }
  }
  return hist;
}

std::uint8_t lbp_pattern(const Patch& patch, int x, int y) {
  const double center = patch.at(x, y);
  std::uint8_t pattern = 0;
  for (std::size_t k = 0; k < kNeighbors.size(); ++k) {
    const auto [dx, dy] = kNeighbors[k];
    if (patch.at(x + dx, y + dy) >= center) pattern |= static_cast<std::uint8_t>(1u << k);
  }
  return pattern;
}

std::size_t lbp_uniform_bin(std::uint8_t pattern) {
  static const auto table = build_uniform_table();
  return table[pattern];
}

Eigen::VectorXd lbp_descriptor(const Patch& patch) {
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(kLbpBins);
  for (int y = 1; y < kPatchSize - 1; ++y) {
    for (int x = 1; x < kPatchSize - 1; ++x) {
      hist[static_cast<Eigen::Index>(lbp_uniform_bin(lbp_pattern(patch, x, y)))] += 1.0;
    }
  }
  return hist;
}

VideoDescriptorSet describe(const DepthVideo& video, const std::vector<InterestPoint>& points,
                            DescriptorKind kind, VideoMeta meta) {
  const std::size_t dim = kind == DescriptorKind::Hog ? kHogBins : kLbpBins;
  std::vector<LocatedDescriptor> out(points.size());
  parallel_for(points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Patch patch = extract_patch(video, points[i]);
      out[i].loc = normalize_location(points[i].x, points[i].y, points[i].t, video.dims());
      out[i].vec = kind == DescriptorKind::Hog ? hog_descriptor(patch) : lbp_descriptor(patch);
    }
  });
  VideoDescriptorSet set(video.dims(), dim, std::move(meta));
  for (auto& d : out) set.add(std::move(d));
  return set;
}

VideoDescriptorSet load_precomputed_descriptors(const std::filesystem::path& path, VideoMeta meta) {
  return to_descriptor_set(read_descriptor_file(path), std::move(meta));
}

}  // namespace mmk
