#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmk/synth.hpp"

namespace mmk {

// Every option the CLI accepts; each subcommand reads the fields it needs.
struct PipelineConfig {
  // paths
  std::string manifest;
  std::string codebook;
  std::string features;
  std::string model;
  std::string out;
  std::string confusion_csv;

  // extract
  std::string descriptor = "hog";  // hog | lbp
  std::string detector = "dense";  // dense | tdiff
  std::uint32_t stride = 8;
  std::size_t top_k = 200;

  // dict
  std::size_t codebook_size = 1000;
  std::uint64_t codebook_seed = 0;
  std::size_t max_iters = 100;
  double rel_tol = 1e-4;
  std::size_t sample_cap = 200000;
  std::string gamma = "median";  // median | <value>
  std::vector<std::uint32_t> dict_subjects;

  // featurize / kernel-check / bench
  std::string mode = "mmk";  // mmk | bof
  int levels = 3;
  std::vector<double> weights;
  double lambda = -1.0;  // < 0: default regularization
  std::size_t pairs = 20;
  double tolerance = 1e-6;

  // train / eval
  double C = 1.0;
  std::size_t epochs = 1000;
  double eps = 1e-5;
  std::uint64_t solver_seed = 0;
  bool l2_normalize = false;
  std::string protocol = "loso";  // split | loso
  std::size_t train_subjects = 5;
  std::size_t runs = 5;
  std::uint64_t split_seed = 0;

  // synth
  SynthConfig synth;
  bool render_frames = false;

  // bench
  std::size_t bench_m = 10000;
  std::size_t bench_basis = 256;
  std::size_t bench_dim = 64;
  std::size_t bench_reps = 3;
  double max_ratio = 2.5;
  std::uint64_t bench_seed = 0;
};

// Parses `args` (without the program name), runs the selected subcommand and
// returns the process exit status. Failures are reported on `err` with the
// name of the failing stage.
int run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmk
