#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>

#include "mmk/classify.hpp"
#include "mmk/error.hpp"
#include "mmk/io.hpp"
#include "oracles.hpp"

using namespace mmk;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::uint32_t u32_at(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[off + static_cast<std::size_t>(i)]);
  return v;
}

float f32_at(const std::string& s, std::size_t off) {
  const std::uint32_t bits = u32_at(s, off);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

DescriptorFile sample_descriptor_file(std::mt19937_64& rng, std::uint32_t m, std::uint32_t d) {
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  DescriptorFile f;
  f.dims = VideoDims(64, 48, 20);
  f.dim = d;
  for (std::uint32_t i = 0; i < m; ++i) {
    DescriptorRecord r;
    r.x = 64 * unit(rng);
    r.y = 48 * unit(rng);
    r.t = static_cast<float>(i % 20);
    for (std::uint32_t k = 0; k < d; ++k) r.vec.push_back(unit(rng) - 0.5f);
    f.records.push_back(r);
  }
  return f;
}

EvalReport sample_report() {
  std::mt19937_64 rng(81);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureDataset ds;
  for (std::uint32_t s = 0; s < 4; ++s) {
    for (std::uint32_t c = 0; c < 3; ++c) {
      for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd f = Eigen::VectorXd::NullaryExpr(4, [&] { return noise(rng); });
        f[c] += 2.0;
        ds.features.push_back(f);
        ds.labels.push_back(5 * c);
        ds.subjects.push_back(s);
      }
    }
  }
  return evaluate_subject_split(ds, 2, 3, 4);
}

}  // namespace

TEST_CASE("descriptor files follow the documented byte layout") {
  const fs::path dir = oracle::scratch_dir("io_layout");
  std::mt19937_64 rng(82);
  const DescriptorFile f = sample_descriptor_file(rng, 3, 2);
  write_descriptor_file(dir / "a.mmkd", f);
  const std::string bytes = slurp(dir / "a.mmkd");
  REQUIRE(bytes.size() == 28 + 3 * 5 * 4);
  CHECK(bytes.substr(0, 4) == "MMKD");
  CHECK(u32_at(bytes, 4) == 1);
  CHECK(u32_at(bytes, 8) == 3);
  CHECK(u32_at(bytes, 12) == 2);
  CHECK(u32_at(bytes, 16) == 64);
  CHECK(u32_at(bytes, 20) == 48);
  CHECK(u32_at(bytes, 24) == 20);
  CHECK(f32_at(bytes, 28) == f.records[0].x);
  CHECK(f32_at(bytes, 28 + 4 * 4) == f.records[0].vec[1]);
  CHECK(f32_at(bytes, 28 + 20 * 2 + 8) == f.records[2].t);
}

TEST_CASE("descriptor files round-trip byte for byte") {
  const fs::path dir = oracle::scratch_dir("io_mmkd");
  std::mt19937_64 rng(83);
  const DescriptorFile f = sample_descriptor_file(rng, 50, 7);
  write_descriptor_file(dir / "a.mmkd", f);
  const DescriptorFile back = read_descriptor_file(dir / "a.mmkd");
  CHECK(back.dims == f.dims);
  CHECK(back.records.size() == 50);
  CHECK(back.records[17].vec == f.records[17].vec);
  write_descriptor_file(dir / "b.mmkd", back);
  CHECK(slurp(dir / "a.mmkd") == slurp(dir / "b.mmkd"));

  // through a descriptor set and back
  write_descriptor_file(dir / "c.mmkd", to_descriptor_file(to_descriptor_set(back)));
  const DescriptorFile again = read_descriptor_file(dir / "c.mmkd");
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(again.records[i].vec == f.records[i].vec);
    CHECK(again.records[i].x == doctest::Approx(f.records[i].x).epsilon(1e-6));
    CHECK(again.records[i].t == doctest::Approx(f.records[i].t).epsilon(1e-6));
  }
}

TEST_CASE("descriptor readers reject damaged files") {
  const fs::path dir = oracle::scratch_dir("io_bad");
  std::mt19937_64 rng(84);
  write_descriptor_file(dir / "ok.mmkd", sample_descriptor_file(rng, 4, 3));
  const std::string good = slurp(dir / "ok.mmkd");

  dump(dir / "short.mmkd", good.substr(0, good.size() - 1));
  dump(dir / "long.mmkd", good + "x");
  std::string magic = good;
  magic[0] = 'X';
  dump(dir / "magic.mmkd", magic);
  std::string version = good;
  version[4] = 2;
  dump(dir / "version.mmkd", version);
  std::string inf = good;
  const float big = std::numeric_limits<float>::infinity();
  std::memcpy(inf.data() + 40, &big, 4);
  dump(dir / "inf.mmkd", inf);
  std::string zero_dims = good;
  std::memset(zero_dims.data() + 16, 0, 4);
  dump(dir / "dims.mmkd", zero_dims);

  for (const char* name : {"short.mmkd", "long.mmkd", "magic.mmkd", "version.mmkd", "inf.mmkd", "dims.mmkd"}) {
    CAPTURE(name);
    CHECK_THROWS_AS(read_descriptor_file(dir / name), FormatError);
  }
  CHECK_THROWS_AS(read_descriptor_file(dir / "absent.mmkd"), IngestionError);
}

TEST_CASE("codebook files round-trip and keep gamma exactly") {
  const fs::path dir = oracle::scratch_dir("io_mmkc");
  std::mt19937_64 rng(85);
  DescriptorMatrix c = oracle::random_matrix(rng, 9, 4);
  c = c.cast<float>().cast<double>();
  write_codebook_file(dir / "a.mmkc", Codebook(c), 0.123456789012345);
  const std::string bytes = slurp(dir / "a.mmkc");
  CHECK(bytes.size() == 24 + 9 * 4 * 4);
  CHECK(bytes.substr(0, 4) == "MMKC");
  CHECK(u32_at(bytes, 8) == 9);
  CHECK(u32_at(bytes, 12) == 4);
  const CodebookFile back = read_codebook_file(dir / "a.mmkc");
  CHECK(back.gamma == 0.123456789012345);
  CHECK(back.centers == c);
  write_codebook_file(dir / "b.mmkc", back.codebook(), back.gamma);
  CHECK(slurp(dir / "a.mmkc") == slurp(dir / "b.mmkc"));
}

TEST_CASE("feature files round-trip") {
  const fs::path dir = oracle::scratch_dir("io_mmkf");
  FeatureFile f;
  f.dim = 5;
  f.levels = 2;
  f.basis_size = 1;
  for (std::uint32_t i = 0; i < 6; ++i) f.records.push_back({i % 2, i / 2, {1.5f, -2.0f, 0.0f, 1e-20f, 3.25f * i}});
  write_feature_file(dir / "a.mmkf", f);
  const std::string bytes = slurp(dir / "a.mmkf");
  CHECK(bytes.size() == 24 + 6 * (8 + 20));
  CHECK(u32_at(bytes, 16) == 2);
  const FeatureFile back = read_feature_file(dir / "a.mmkf");
  CHECK(back.records[5].values == f.records[5].values);
  write_feature_file(dir / "b.mmkf", back);
  CHECK(slurp(dir / "a.mmkf") == slurp(dir / "b.mmkf"));
  const FeatureDataset ds = back.dataset();
  CHECK(ds.size() == 6);
  CHECK(ds.labels[3] == 1);
  CHECK(ds.subjects[5] == 2);
  CHECK(ds.features[4][4] == 13.0);
}

TEST_CASE("models round-trip through text exactly") {
  const fs::path dir = oracle::scratch_dir("io_model");
  std::mt19937_64 rng(86);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Eigen::VectorXd> x;
  std::vector<std::uint32_t> y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(Eigen::VectorXd::NullaryExpr(6, [&] { return noise(rng); }));
    y.push_back(static_cast<std::uint32_t>(i % 3) * 7);
  }
  LinearParams p;
  p.C = 0.3;
  p.seed = 12;
  const LinearModel m = train_linear_ovr(x, y, p);
  write_model(dir / "a.txt", m);
  const LinearModel back = read_model(dir / "a.txt");
  CHECK(back.labels == m.labels);
  CHECK(back.weights == m.weights);
  CHECK(back.biases == m.biases);
  CHECK(back.params.C == 0.3);
  CHECK(back.params.seed == 12);
  write_model(dir / "b.txt", back);
  CHECK(slurp(dir / "a.txt") == slurp(dir / "b.txt"));
  const std::string text = slurp(dir / "a.txt");
  CHECK(text.rfind("mmk-linear-model 1\nloss squared_hinge_l2\nC 0.3\n", 0) == 0);
}

TEST_CASE("evaluation reports round-trip through text exactly") {
  const fs::path dir = oracle::scratch_dir("io_report");
  const EvalReport r = sample_report();
  write_eval_report(dir / "a.txt", r);
  const EvalReport back = read_eval_report(dir / "a.txt");
  CHECK(back.protocol == r.protocol);
  CHECK(back.classes == r.classes);
  CHECK(back.confusion == r.confusion);
  CHECK(back.accuracy == r.accuracy);
  CHECK(back.stddev_accuracy == r.stddev_accuracy);
  REQUIRE(back.runs.size() == r.runs.size());
  CHECK(back.runs[1].test_subjects == r.runs[1].test_subjects);
  write_eval_report(dir / "b.txt", back);
  CHECK(slurp(dir / "a.txt") == slurp(dir / "b.txt"));
  CHECK(slurp(dir / "a.txt") == format_eval_report(r));
}

TEST_CASE("confusion matrices are written as CSV") {
  const fs::path dir = oracle::scratch_dir("io_csv");
  EvalReport r;
  r.classes = {2, 9};
  r.confusion.resize(2, 2);
  r.confusion << 3, 1, 0, 4;
  write_confusion_csv(dir / "c.csv", r);
  CHECK(slurp(dir / "c.csv") == "true\\predicted,2,9\n2,3,1\n9,0,4\n");
}

TEST_CASE("manifests resolve relative paths and accept unlabeled videos") {
  const fs::path dir = oracle::scratch_dir("io_manifest");
  dump(dir / "m.txt", "# videos\n\nsub/a.mmkd 3 1\n/abs/b.mmkd - 2\n");
  const auto entries = read_manifest(dir / "m.txt");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].path == dir / "sub/a.mmkd");
  CHECK(entries[0].label == 3u);
  CHECK(entries[0].subject == 1);
  CHECK(entries[1].path == fs::path("/abs/b.mmkd"));
  CHECK(!entries[1].label);

  write_manifest(dir / "n.txt", entries);
  write_manifest(dir / "o.txt", read_manifest(dir / "n.txt"));
  CHECK(slurp(dir / "n.txt") == slurp(dir / "o.txt"));

  dump(dir / "bad.txt", "a.mmkd 1\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad.txt"), FormatError);
  dump(dir / "bad2.txt", "a.mmkd x 1\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad2.txt"), FormatError);
}

TEST_CASE("format_double is shortest round-trip text") {
  std::mt19937_64 rng(87);
  std::uniform_real_distribution<double> unit(-1e6, 1e6);
  for (int n = 0; n < 1000; ++n) {
    const double v = unit(rng) * std::pow(10.0, n % 40 - 20);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
}
