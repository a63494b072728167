#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mmk/codebook.hpp"
#include "mmk/error.hpp"
#include "mmk/matchkernel.hpp"
#include "mmk/synth.hpp"
#include "oracles.hpp"

using namespace mmk;

namespace {

std::vector<std::vector<double>> sorted_vectors(const VideoDescriptorSet& v) {
  std::vector<std::vector<double>> out;
  for (const auto& d : v.descriptors()) out.emplace_back(d.vec.data(), d.vec.data() + d.vec.size());
  std::sort(out.begin(), out.end());
  return out;
}

DescriptorMatrix pool_of(const std::vector<VideoDescriptorSet>& videos) {
  std::size_t rows = 0;
  for (const auto& v : videos) rows += v.size();
  DescriptorMatrix pool(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(videos.front().descriptor_dim()));
  Eigen::Index r = 0;
  for (const auto& v : videos) {
    for (const auto& d : v.descriptors()) pool.row(r++) = d.vec.transpose();
  }
  return pool;
}

}  // namespace

TEST_CASE("synthetic videos carry the documented labels, subjects and sizes") {
  SynthConfig cfg;
  const auto videos = synth_gestures(cfg);
  REQUIRE(videos.size() == 80);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const std::size_t label = i / 40, k = i % 40;
    CHECK(videos[i].meta().label == static_cast<std::uint32_t>(label));
    CHECK(videos[i].meta().subject == k % 4);
    CHECK(videos[i].size() == cfg.frames * cfg.prototypes);
    CHECK(videos[i].descriptor_dim() == cfg.descriptor_dim);
    CHECK(videos[i].dims() == VideoDims(cfg.width, cfg.height, cfg.frames));
  }
}

TEST_CASE("synthetic data is deterministic per seed") {
  SynthConfig cfg;
  cfg.samples_per_class = 5;
  const auto a = synth_gestures(cfg);
  const auto b = synth_gestures(cfg);
  cfg.seed = 99;
  const auto c = synth_gestures(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      CHECK(a[i][j].vec == b[i][j].vec);
      CHECK(a[i][j].loc == b[i][j].loc);
    }
  }
  CHECK(a[0][0].vec != c[0][0].vec);
}

TEST_CASE("without noise both classes emit identical descriptor multisets") {
  SynthConfig cfg;
  cfg.noise = 0.0;
  cfg.samples_per_class = 10;
  const auto videos = synth_gestures(cfg);
  for (std::size_t k = 0; k < 10; ++k) CHECK(sorted_vectors(videos[k]) == sorted_vectors(videos[10 + k]));
}

TEST_CASE("the classes move in opposite horizontal directions") {
  SynthConfig cfg;
  cfg.samples_per_class = 6;
  const auto videos = synth_gestures(cfg);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    double early = 0.0, late = 0.0;
    for (const auto& d : videos[i].descriptors()) {
      if (d.loc.w < 0.25) early += d.loc.u;
      if (d.loc.w >= 0.75) late += d.loc.u;
    }
    if (i < 6) CHECK(early < late);
    else CHECK(early > late);
  }
}

TEST_CASE("bag-of-features histograms cannot tell the classes apart") {
  SynthConfig cfg;
  const auto videos = synth_gestures(cfg);
  KMeansParams p;
  p.centers = 8;
  p.seed = 1;
  const Codebook cb = train_codebook(pool_of(videos), p);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < 40; ++a) {
    for (std::size_t b = 40; b < 80; ++b) {
      total += (bof_histogram(videos[a], cb).values() - bof_histogram(videos[b], cb).values()).lpNorm<1>();
      ++pairs;
    }
  }
  CHECK(total / static_cast<double>(pairs) <= 0.05);
}

TEST_CASE("two-level feature maps separate the noiseless classes") {
  SynthConfig cfg;
  cfg.noise = 0.0;
  cfg.samples_per_class = 12;
  const auto videos = synth_gestures(cfg);
  const Codebook cb(synth_prototypes(cfg));
  const KernelBasis basis = build_kernel_basis(cb, median_gamma(cb.centers()));
  const PyramidConfig pcfg = PyramidConfig::with_default_weights(2);
  std::vector<Eigen::VectorXd> maps;
  for (const auto& v : videos) maps.push_back(video_feature_map(v, basis, pcfg).values);
  double max_intra = 0.0, min_inter = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < maps.size(); ++a) {
    for (std::size_t b = a + 1; b < maps.size(); ++b) {
      const double dist = (maps[a] - maps[b]).norm();
      if ((a < 12) == (b < 12)) max_intra = std::max(max_intra, dist);
      else min_inter = std::min(min_inter, dist);
    }
  }
  CHECK(min_inter > max_intra);
}

TEST_CASE("rendered depth videos follow the same trajectories") {
  SynthConfig cfg;
  cfg.samples_per_class = 3;
  const auto videos = synth_gestures(cfg);
  const auto depth = synth_depth_videos(cfg);
  REQUIRE(depth.size() == videos.size());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    CHECK(depth[i].dims() == videos[i].dims());
    for (std::uint32_t t : {0u, cfg.frames - 1}) {
      const GrayImage& f = depth[i].frame(t);
      const auto peak = std::max_element(f.pixels.begin(), f.pixels.end()) - f.pixels.begin();
      const double px = static_cast<double>(peak % f.width);
      double mean_x = 0.0;
      std::size_t n = 0;
      for (const auto& d : videos[i].descriptors()) {
        if (oracle::cell(d.loc.w, static_cast<int>(cfg.frames)) == t) {
          mean_x += d.loc.u * cfg.width;
          ++n;
        }
      }
      CHECK(std::abs(px - mean_x / static_cast<double>(n)) <= cfg.blob_radius);
      CHECK(*std::max_element(f.pixels.begin(), f.pixels.end()) <= 0.9);
      CHECK(*std::min_element(f.pixels.begin(), f.pixels.end()) >= 0.1);
    }
  }
}

TEST_CASE("synthetic configuration is validated") {
  SynthConfig cfg;
  cfg.subjects = 0;
  CHECK_THROWS_AS(synth_gestures(cfg), Error);
  cfg = SynthConfig{};
  cfg.noise = -1.0;
  CHECK_THROWS_AS(synth_gestures(cfg), Error);
}
