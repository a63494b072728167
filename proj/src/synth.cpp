#include "mmk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mmk/error.hpp"

namespace mmk {

namespace {

// The blob sweeps one horizontal half of the frame during the first half of
// the frames and the other half afterwards, keeping its radius clear of the
// vertical midline so that no descriptor crosses it early or late.
struct Trajectory {
  double width = 1.0;
  double start = 0.0;  // first-half sweep [start, mid_gap_lo]
  double end = 0.0;    // second-half sweep [mid_gap_hi, end]
  double margin = 0.0;
  bool mirrored = false;
  double y = 0.0;
  double phase = 0.0;

  double x_at(std::uint32_t t, std::uint32_t frames) const {
    const std::uint32_t first = (frames + 1) / 2;
    const bool early = t < first;
    const std::uint32_t offset = early ? t : t - first;
    const std::uint32_t span = early ? first : frames - first;
    const double p = span > 1 ? static_cast<double>(offset) / (span - 1) : 0.0;
    const double lo = early ? start : width / 2 + margin;
    const double hi = early ? width / 2 - margin : end;
    const double x = lo + p * (hi - lo);
    return mirrored ? width - x : x;
  }
};

std::mt19937_64 sample_rng(const SynthConfig& cfg, std::size_t label, std::size_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(label), static_cast<std::uint32_t>(k)};
  return std::mt19937_64(seq);
}

Trajectory make_trajectory(const SynthConfig& cfg, std::size_t label, std::size_t subject, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Trajectory tr;
  tr.width = cfg.width;
  tr.margin = cfg.blob_radius + 1.0;
  tr.start = tr.margin + 0.1 * cfg.width * unit(rng);
  tr.end = cfg.width - tr.margin - 0.1 * cfg.width * unit(rng);
  tr.mirrored = label == 1;
  // Subjects differ in the height at which they perform the gesture, always
  // within the upper half of the frame.
  const double spread = cfg.subjects > 1 ? (static_cast<double>(subject) / (cfg.subjects - 1) - 0.5) : 0.0;
  tr.y = cfg.height * (0.25 + 0.08 * spread + 0.02 * (unit(rng) - 0.5));
  tr.phase = unit(rng);
  return tr;
}

}  // namespace

void SynthConfig::validate() const {
  if (samples_per_class == 0 || subjects == 0 || frames == 0 || width == 0 || height == 0 || prototypes == 0 ||
      descriptor_dim == 0) {
    throw Error("synthetic config counts must be positive");
  }
  if (!(noise >= 0.0) || !(blob_radius >= 0.0)) throw Error("synthetic noise and blob radius must be non-negative");
}

DescriptorMatrix synth_prototypes(const SynthConfig& cfg) {
  DescriptorMatrix protos = DescriptorMatrix::Zero(static_cast<Eigen::Index>(cfg.prototypes),
                                                   static_cast<Eigen::Index>(cfg.descriptor_dim));
  if (cfg.descriptor_dim >= cfg.prototypes) {
    for (Eigen::Index q = 0; q < protos.rows(); ++q) protos(q, q) = 1.0;
    return protos;
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index q = 0; q < protos.rows(); ++q) {
    for (Eigen::Index j = 0; j < protos.cols(); ++j) protos(q, j) = unit(rng);
  }
  return protos;
}

std::vector<VideoDescriptorSet> synth_gestures(const SynthConfig& cfg) {
  cfg.validate();
  const DescriptorMatrix protos = synth_prototypes(cfg);
  const VideoDims dims(cfg.width, cfg.height, cfg.frames);
  std::vector<VideoDescriptorSet> out;
  for (std::size_t label = 0; label < kSynthClasses; ++label) {
    for (std::size_t k = 0; k < cfg.samples_per_class; ++k) {
      const std::size_t subject = k % cfg.subjects;
      auto rng = sample_rng(cfg, label, k);
      const Trajectory tr = make_trajectory(cfg, label, subject, rng);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> noise(0.0, 1.0);

      VideoMeta meta;
      meta.video_id = "synth_c" + std::to_string(label) + "_" + std::to_string(k);
      meta.subject = static_cast<std::uint32_t>(subject);
      meta.label = static_cast<std::uint32_t>(label);
      VideoDescriptorSet video(dims, cfg.descriptor_dim, meta);
      for (std::uint32_t t = 0; t < cfg.frames; ++t) {
        const double cx = tr.x_at(t, cfg.frames);
        for (std::size_t q = 0; q < cfg.prototypes; ++q) {
          const double angle = 2.0 * std::numbers::pi * (static_cast<double>(q) + tr.phase) / cfg.prototypes;
          const double r = cfg.blob_radius * (0.2 + 0.8 * unit(rng));
          const double x = std::clamp(cx + r * std::cos(angle), 0.0, cfg.width - 1.0);
          const double y = std::clamp(tr.y + r * std::sin(angle), 0.0, cfg.height - 1.0);
          LocatedDescriptor d;
          d.loc = normalize_location(x, y, t, dims);
          d.vec = protos.row(static_cast<Eigen::Index>(q)).transpose();
          for (Eigen::Index j = 0; j < d.vec.size(); ++j) d.vec[j] += cfg.noise * noise(rng);
          video.add(std::move(d));
        }
      }
      out.push_back(std::move(video));
    }
  }
  return out;
}

std::vector<DepthVideo> synth_depth_videos(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<DepthVideo> out;
  const double sigma = std::max(cfg.blob_radius / 2.0, 0.5);
  for (std::size_t label = 0; label < kSynthClasses; ++label) {
    for (std::size_t k = 0; k < cfg.samples_per_class; ++k) {
      auto rng = sample_rng(cfg, label, k);
      const Trajectory tr = make_trajectory(cfg, label, k % cfg.subjects, rng);
      std::vector<GrayImage> frames;
      for (std::uint32_t t = 0; t < cfg.frames; ++t) {
        const double cx = tr.x_at(t, cfg.frames);
        GrayImage img(cfg.width, cfg.height);
        for (std::uint32_t y = 0; y < cfg.height; ++y) {
          for (std::uint32_t x = 0; x < cfg.width; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - tr.y) * (y - tr.y);
            img.at(x, y) = 0.1 + 0.8 * std::exp(-d2 / (2.0 * sigma * sigma));
          }
        }
        frames.push_back(std::move(img));
      }
      out.emplace_back(std::move(frames));
    }
  }
  return out;
}

}  // namespace mmk
