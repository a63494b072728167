#include <doctest.h>

#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

#include "mmk/io.hpp"
#include "mmk/pipeline.hpp"
#include "oracles.hpp"

using namespace mmk;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = run_pipeline(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small synthetic dataset with a codebook, shared by several cases.
fs::path prepared(const std::string& name) {
  const fs::path dir = oracle::scratch_dir(name);
  REQUIRE(run({"synth", "--out", (dir / "data").string(), "--samples-per-class", "12"}).status == 0);
  REQUIRE(run({"dict", "--manifest", (dir / "data/manifest.txt").string(), "--out", (dir / "cb.mmkc").string(), "-D",
               "8", "--seed", "3"})
              .status == 0);
  return dir;
}

}  // namespace

TEST_CASE("synth writes descriptor files and a manifest") {
  const fs::path dir = oracle::scratch_dir("pipe_synth");
  const Run r = run({"synth", "--out", dir.string(), "--samples-per-class", "3", "--subjects", "3"});
  CHECK(r.status == 0);
  const auto entries = read_manifest(dir / "manifest.txt");
  REQUIRE(entries.size() == 6);
  CHECK(entries[4].label == 1u);
  CHECK(entries[4].subject == 1);
  const DescriptorFile f = read_descriptor_file(entries[0].path);
  CHECK(f.dim == 8);
  CHECK(f.records.size() == 20 * 8);
}

TEST_CASE("featurize then kernel-check confirms the duality") {
  const fs::path dir = prepared("pipe_check");
  const std::string manifest = (dir / "data/manifest.txt").string();
  const std::string cb = (dir / "cb.mmkc").string();
  const Run f = run({"featurize", "--manifest", manifest, "--codebook", cb, "--out", (dir / "f.mmkf").string()});
  CHECK(f.status == 0);
  const FeatureFile ff = read_feature_file(dir / "f.mmkf");
  CHECK(ff.dim == 8 * 36);
  CHECK(ff.records.size() == 24);

  const Run r = run({"kernel-check", "--manifest", manifest, "--codebook", cb, "-L", "3"});
  CHECK(r.status == 0);
  std::smatch m;
  REQUIRE(std::regex_search(r.out, m, std::regex("max_relative_deviation (\\S+)")));
  CHECK(std::stod(m[1]) <= 1e-6);
}

TEST_CASE("kernel-check fails when the tolerance cannot be met") {
  const fs::path dir = prepared("pipe_check_fail");
  const Run r = run({"kernel-check", "--manifest", (dir / "data/manifest.txt").string(), "--codebook",
                     (dir / "cb.mmkc").string(), "--tolerance", "-1"});
  CHECK(r.status != 0);
  CHECK(r.err.find("kernel-check") != std::string::npos);
}

TEST_CASE("dict with more centers than distinct descriptors names the codebook stage") {
  const fs::path dir = prepared("pipe_dict");
  const Run r = run({"dict", "--manifest", (dir / "data/manifest.txt").string(), "--out", (dir / "big.mmkc").string(),
                     "-D", "100000"});
  CHECK(r.status != 0);
  CHECK(r.err.find("codebook") != std::string::npos);
  CHECK(!fs::exists(dir / "big.mmkc"));
}

TEST_CASE("dict stores the median bandwidth or a fixed one") {
  const fs::path dir = prepared("pipe_gamma");
  CHECK(read_codebook_file(dir / "cb.mmkc").gamma > 0.0);
  CHECK(run({"dict", "--manifest", (dir / "data/manifest.txt").string(), "--out", (dir / "fixed.mmkc").string(), "-D",
             "4", "--gamma", "0.75", "--subjects", "0,1"})
            .status == 0);
  const CodebookFile cb = read_codebook_file(dir / "fixed.mmkc");
  CHECK(cb.gamma == 0.75);
  CHECK(cb.centers.rows() == 4);
}

TEST_CASE("eval twice with the same seeds writes identical reports") {
  const fs::path dir = prepared("pipe_eval");
  REQUIRE(run({"featurize", "--manifest", (dir / "data/manifest.txt").string(), "--codebook",
               (dir / "cb.mmkc").string(), "--out", (dir / "f.mmkf").string(), "-L", "2"})
              .status == 0);
  for (const char* protocol : {"loso", "split"}) {
    for (const char* name : {"a.txt", "b.txt"}) {
      const Run r = run({"eval", "--features", (dir / "f.mmkf").string(), "--protocol", protocol, "--train-subjects",
                         "2", "--runs", "3", "--seed", "8", "--out", (dir / name).string(), "--confusion",
                         (dir / "c.csv").string()});
      CHECK(r.status == 0);
    }
    CHECK(slurp(dir / "a.txt") == slurp(dir / "b.txt"));
    const EvalReport rep = read_eval_report(dir / "a.txt");
    CHECK(rep.protocol == protocol);
    CHECK(rep.accuracy >= 0.95);
    CHECK(slurp(dir / "c.csv").rfind("true\\predicted,0,1\n", 0) == 0);
  }
}

TEST_CASE("bof features are plain normalized histograms") {
  const fs::path dir = prepared("pipe_bof");
  REQUIRE(run({"featurize", "--mode", "bof", "-L", "1", "--manifest", (dir / "data/manifest.txt").string(),
               "--codebook", (dir / "cb.mmkc").string(), "--out", (dir / "b.mmkf").string()})
              .status == 0);
  const FeatureFile ff = read_feature_file(dir / "b.mmkf");
  CHECK(ff.dim == 8);
  for (const auto& r : ff.records) {
    double s = 0.0;
    for (float v : r.values) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("a config file sets options and the command line overrides it") {
  const fs::path dir = prepared("pipe_config");
  REQUIRE(run({"featurize", "--manifest", (dir / "data/manifest.txt").string(), "--codebook",
               (dir / "cb.mmkc").string(), "--out", (dir / "f.mmkf").string(), "-L", "2"})
              .status == 0);
  std::ofstream(dir / "cfg.ini") << "[eval]\nprotocol=split\ntrain-subjects=3\nruns=4\nseed=2\n";
  const std::string features = (dir / "f.mmkf").string();
  CHECK(run({"--config", (dir / "cfg.ini").string(), "eval", "--features", features, "--out",
             (dir / "a.txt").string()})
            .status == 0);
  CHECK(run({"--config", (dir / "cfg.ini").string(), "eval", "--features", features, "--runs", "2", "--out",
             (dir / "b.txt").string()})
            .status == 0);
  const EvalReport a = read_eval_report(dir / "a.txt");
  const EvalReport b = read_eval_report(dir / "b.txt");
  CHECK(a.protocol == "split");
  CHECK(a.runs.size() == 4);
  CHECK(a.runs[0].test_subjects.size() == 1);
  CHECK(b.runs.size() == 2);
}

TEST_CASE("train writes a model that predict reads back") {
  const fs::path dir = prepared("pipe_train");
  REQUIRE(run({"featurize", "--manifest", (dir / "data/manifest.txt").string(), "--codebook",
               (dir / "cb.mmkc").string(), "--out", (dir / "f.mmkf").string(), "-L", "2"})
              .status == 0);
  CHECK(run({"train", "--features", (dir / "f.mmkf").string(), "--out", (dir / "m.txt").string(), "-C", "2"})
            .status == 0);
  const LinearModel m = read_model(dir / "m.txt");
  CHECK(m.params.C == 2.0);
  const Run p = run({"predict", "--model", (dir / "m.txt").string(), "--features", (dir / "f.mmkf").string()});
  CHECK(p.status == 0);
  std::istringstream lines(p.out);
  const FeatureDataset ds = read_feature_file(dir / "f.mmkf").dataset();
  std::size_t index = 0, correct = 0;
  std::uint32_t label = 0;
  while (lines >> index >> label) correct += label == ds.labels[index];
  CHECK(correct == ds.size());
}

TEST_CASE("extract turns rendered frames into descriptor files") {
  const fs::path dir = oracle::scratch_dir("pipe_extract");
  REQUIRE(run({"synth", "--out", dir.string(), "--samples-per-class", "2", "--frames", "6", "--render-frames"})
              .status == 0);
  const std::string frames = (dir / "frames_manifest.txt").string();
  CHECK(run({"extract", "--manifest", frames, "--out", (dir / "hog").string(), "--detector", "tdiff", "--top-k",
             "30"})
            .status == 0);
  CHECK(run({"extract", "--manifest", frames, "--out", (dir / "lbp").string(), "--descriptor", "lbp", "--stride",
             "16"})
            .status == 0);
  const auto hog = read_manifest(dir / "hog/manifest.txt");
  const auto lbp = read_manifest(dir / "lbp/manifest.txt");
  REQUIRE(hog.size() == 4);
  REQUIRE(lbp.size() == 4);
  CHECK(hog[3].label == 1u);
  const DescriptorFile h = read_descriptor_file(hog[0].path);
  const DescriptorFile l = read_descriptor_file(lbp[0].path);
  CHECK(h.dim == 36);
  CHECK(h.records.size() == 30);
  CHECK(l.dim == 59);
  CHECK(l.records.size() == 6 * 3 * 4);
}

TEST_CASE("bench reports the scaling ratio") {
  const Run r = run({"bench", "-m", "3000", "-D", "32", "-d", "8", "--reps", "1", "--max-ratio", "100"});
  CHECK(r.status == 0);
  CHECK(r.out.find("ratio") != std::string::npos);
}

TEST_CASE("errors exit nonzero and name the failing stage") {
  const fs::path dir = oracle::scratch_dir("pipe_errors");
  const Run missing = run({"featurize", "--manifest", (dir / "none.txt").string(), "--codebook", "x", "--out", "y"});
  CHECK(missing.status != 0);
  CHECK(missing.err.find("featurize stage failed") != std::string::npos);
  const Run frames = run({"extract", "--manifest", (dir / "none.txt").string(), "--out", dir.string()});
  CHECK(frames.err.find("descriptors stage failed") != std::string::npos);
  CHECK(run({}).status != 0);
  CHECK(run({"nonsense"}).status != 0);
  CHECK(run({"eval", "--features", "f", "--protocol", "kfold"}).status != 0);
}
