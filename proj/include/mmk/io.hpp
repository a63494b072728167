#pragma once

// Persistence. Binary files are little-endian:
//
//   MMKD descriptors: "MMKD" u32 version u32 m u32 d u32 width u32 height
//                     u32 frames, then m x [f32 x, f32 y, f32 t, f32 * d]
//   MMKC codebook:    "MMKC" u32 version u32 D u32 d f64 gamma (0 = unset),
//                     then D x d f32 centers
//   MMKF features:    "MMKF" u32 version u32 count u32 dim u32 L u32 D, then
//                     count x [u32 label, u32 subject, f32 * dim]
//
// Models and evaluation reports are line-oriented text (see README).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmk/classify.hpp"
#include "mmk/codebook.hpp"
#include "mmk/core.hpp"
#include "mmk/matchkernel.hpp"

namespace mmk {

inline constexpr std::uint32_t kFormatVersion = 1;

struct DescriptorRecord {
  float x = 0.0f;
  float y = 0.0f;
  float t = 0.0f;
  std::vector<float> vec;
};

// Raw descriptor file contents; coordinates are in pixels and frames.
struct DescriptorFile {
  VideoDims dims;
  std::uint32_t dim = 0;
  std::vector<DescriptorRecord> records;
};

DescriptorFile read_descriptor_file(const std::filesystem::path& path);
void write_descriptor_file(const std::filesystem::path& path, const DescriptorFile& file);

VideoDescriptorSet to_descriptor_set(const DescriptorFile& file, VideoMeta meta = {});
// Inverse of normalization up to float rounding: x = u * width etc.
DescriptorFile to_descriptor_file(const VideoDescriptorSet& set);

struct CodebookFile {
  DescriptorMatrix centers;  // values are exactly representable as f32
  double gamma = 0.0;

  Codebook codebook() const { return Codebook(centers); }
};

CodebookFile read_codebook_file(const std::filesystem::path& path);
void write_codebook_file(const std::filesystem::path& path, const Codebook& cb, double gamma);

struct FeatureRecord {
  std::uint32_t label = 0;
  std::uint32_t subject = 0;
  std::vector<float> values;
};

struct FeatureFile {
  std::uint32_t dim = 0;
  std::uint32_t levels = 1;
  std::uint32_t basis_size = 0;
  std::vector<FeatureRecord> records;

  FeatureDataset dataset() const;
};

FeatureFile read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const FeatureFile& file);

void write_model(const std::filesystem::path& path, const LinearModel& model);
LinearModel read_model(const std::filesystem::path& path);

std::string format_eval_report(const EvalReport& report);
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_eval_report(const std::filesystem::path& path);
void write_confusion_csv(const std::filesystem::path& path, const EvalReport& report);

// One video per line: "<path> <label|-> <subject>". Blank lines and lines
// starting with '#' are ignored; relative paths resolve against the manifest's
// directory when read.
struct ManifestEntry {
  std::filesystem::path path;
  std::optional<std::uint32_t> label;
  std::uint32_t subject = 0;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace mmk
