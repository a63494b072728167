#pragma once

// Synthetic two-class gesture data that only spatio-temporal layout can
// separate: a blob sweeps left-to-right (label 0) or right-to-left (label 1),
// emitting the same prototype descriptors along the way.

#include <cstdint>
#include <vector>

#include "mmk/codebook.hpp"
#include "mmk/core.hpp"
#include "mmk/descriptors.hpp"

namespace mmk {

struct SynthConfig {
  std::size_t samples_per_class = 40;
  std::size_t subjects = 4;
  std::uint32_t frames = 20;
  std::uint32_t width = 64;
  std::uint32_t height = 48;
  double blob_radius = 6.0;
  // Each frame emits one descriptor per prototype.
  std::size_t prototypes = 8;
  std::size_t descriptor_dim = 8;
  double noise = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
};

inline constexpr std::size_t kSynthClasses = 2;

// Prototype vectors shared by both classes: unit basis vectors when
// descriptor_dim >= prototypes, seeded uniform points otherwise.
DescriptorMatrix synth_prototypes(const SynthConfig& cfg);

// samples_per_class videos of label 0 followed by as many of label 1; sample
// k of each class belongs to subject k % subjects.
std::vector<VideoDescriptorSet> synth_gestures(const SynthConfig& cfg);

// Depth-frame renderings of the same trajectories (bright blob on a dark
// background), in the same order as synth_gestures.
std::vector<DepthVideo> synth_depth_videos(const SynthConfig& cfg);

}  // namespace mmk
