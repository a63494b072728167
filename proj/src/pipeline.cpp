#include "mmk/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>

#include <CLI11.hpp>

#include "mmk/classify.hpp"
#include "mmk/codebook.hpp"
#include "mmk/descriptors.hpp"
#include "mmk/error.hpp"
#include "mmk/io.hpp"
#include "mmk/matchkernel.hpp"

namespace fs = std::filesystem;

namespace mmk {

namespace {

// Label written to feature files for videos without one.
constexpr std::uint32_t kUnlabeled = 0xffffffffu;

struct Context {
  const PipelineConfig& cfg;
  std::ostream& out;
};

std::vector<VideoDescriptorSet> load_descriptor_sets(const std::string& manifest) {
  std::vector<VideoDescriptorSet> sets;
  for (const auto& e : read_manifest(manifest)) {
    VideoMeta meta;
    meta.video_id = e.path.stem().string();
    meta.subject = e.subject;
    meta.label = e.label;
    sets.push_back(load_precomputed_descriptors(e.path, meta));
  }
  if (sets.empty()) throw IngestionError("manifest " + manifest + " lists no videos");
  const std::size_t d = sets.front().descriptor_dim();
  for (const auto& s : sets) {
    if (s.descriptor_dim() != d) throw DimensionMismatch("videos in " + manifest + " differ in descriptor dimension");
  }
  return sets;
}

PyramidConfig pyramid_from(const PipelineConfig& cfg) {
  if (!cfg.weights.empty()) return PyramidConfig(cfg.levels, cfg.weights);
  return cfg.mode == "bof" ? PyramidConfig::unweighted(cfg.levels) : PyramidConfig::with_default_weights(cfg.levels);
}

std::optional<double> lambda_from(const PipelineConfig& cfg) {
  if (cfg.lambda < 0.0) return std::nullopt;
  return cfg.lambda;
}

KernelBasis basis_from(const PipelineConfig& cfg, const CodebookFile& file) {
  double gamma = file.gamma;
  if (cfg.gamma != "median") {
    try {
      gamma = std::stod(cfg.gamma);
    } catch (const std::exception&) {
      throw Error("--gamma must be 'median' or a positive number, got '" + cfg.gamma + "'");
    }
  }
  if (!(gamma > 0.0)) throw Error("codebook file carries no gamma; pass --gamma <value>");
  return build_kernel_basis(file.codebook(), gamma, lambda_from(cfg));
}

void l2_normalize(FeatureDataset& ds) {
  for (auto& f : ds.features) {
    const double n = f.norm();
    if (n > 0.0) f /= n;
  }
}

// --- subcommands ------------------------------------------------------------

int cmd_synth(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  const auto videos = synth_gestures(cfg.synth);
  std::vector<ManifestEntry> entries;
  for (const auto& v : videos) {
    const std::string name = v.meta().video_id + ".mmkd";
    write_descriptor_file(dir / name, to_descriptor_file(v));
    entries.push_back({name, v.meta().label, v.meta().subject});
  }
  write_manifest(dir / "manifest.txt", entries);
  if (cfg.render_frames) {
    const auto depth = synth_depth_videos(cfg.synth);
    std::vector<ManifestEntry> frame_entries;
    for (std::size_t i = 0; i < depth.size(); ++i) {
      const fs::path rel = fs::path("frames") / videos[i].meta().video_id;
      fs::create_directories(dir / rel);
      for (std::size_t t = 0; t < depth[i].frames().size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.pgm", t);
        write_pgm(dir / rel / name, depth[i].frame(t));
      }
      frame_entries.push_back({rel, videos[i].meta().label, videos[i].meta().subject});
    }
    write_manifest(dir / "frames_manifest.txt", frame_entries);
  }
  ctx.out << "synth: wrote " << videos.size() << " videos to " << dir.string() << '\n';
  return 0;
}

int cmd_extract(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const DescriptorKind kind = cfg.descriptor == "lbp" ? DescriptorKind::Lbp : DescriptorKind::Hog;
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  std::set<std::string> used;
  for (const auto& e : read_manifest(cfg.manifest)) {
    const DepthVideo video = load_frames(e.path);
    const auto points = cfg.detector == "tdiff" ? detect_interest_points(video, TemporalDiff{cfg.top_k})
                                                : detect_interest_points(video, DenseGrid{cfg.stride});
    const VideoDescriptorSet set = describe(video, points, kind);
    DescriptorFile file;
    file.dims = video.dims();
    file.dim = static_cast<std::uint32_t>(set.descriptor_dim());
    for (std::size_t i = 0; i < points.size(); ++i) {
      DescriptorRecord r;
      r.x = static_cast<float>(points[i].x);
      r.y = static_cast<float>(points[i].y);
      r.t = static_cast<float>(points[i].t);
      r.vec.assign(set[i].vec.data(), set[i].vec.data() + set[i].vec.size());
      file.records.push_back(std::move(r));
    }
    const std::string name = e.path.filename().string() + ".mmkd";
    if (!used.insert(name).second) throw Error("two frame directories share the name " + name);
    write_descriptor_file(dir / name, file);
    entries.push_back({name, e.label, e.subject});
  }
  write_manifest(dir / "manifest.txt", entries);
  ctx.out << "extract: " << entries.size() << " videos, " << cfg.descriptor << " descriptors\n";
  return 0;
}

int cmd_dict(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto sets = load_descriptor_sets(cfg.manifest);
  const std::set<std::uint32_t> keep(cfg.dict_subjects.begin(), cfg.dict_subjects.end());
  std::size_t rows = 0;
  for (const auto& s : sets) {
    if (keep.empty() || keep.count(s.meta().subject)) rows += s.size();
  }
  DescriptorMatrix pool(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(sets.front().descriptor_dim()));
  Eigen::Index r = 0;
  for (const auto& s : sets) {
    if (!keep.empty() && !keep.count(s.meta().subject)) continue;
    for (const auto& d : s.descriptors()) pool.row(r++) = d.vec.transpose();
  }
  KMeansParams params;
  params.centers = cfg.codebook_size;
  params.seed = cfg.codebook_seed;
  params.max_iters = cfg.max_iters;
  params.rel_tol = cfg.rel_tol;
  params.sample_cap = cfg.sample_cap;
  const Codebook cb = train_codebook(pool, params);
  double gamma = 0.0;
  if (cfg.gamma == "median") {
    gamma = median_gamma(pool, cfg.codebook_seed);
  } else {
    gamma = std::stod(cfg.gamma);
  }
  write_codebook_file(cfg.out, cb, gamma);
  ctx.out << "dict: D=" << cb.size() << " d=" << cb.dim() << " iterations=" << cb.meta().iterations
          << " inertia=" << format_double(cb.meta().inertia) << " gamma=" << format_double(gamma) << '\n';
  return 0;
}

int cmd_featurize(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.mode != "mmk" && cfg.mode != "bof") throw Error("--mode must be mmk or bof");
  const auto sets = load_descriptor_sets(cfg.manifest);
  const CodebookFile cbf = read_codebook_file(cfg.codebook);
  const PyramidConfig pcfg = pyramid_from(cfg);
  FeatureFile ff;
  ff.levels = static_cast<std::uint32_t>(pcfg.levels());
  ff.basis_size = static_cast<std::uint32_t>(cbf.centers.rows());
  ff.dim = static_cast<std::uint32_t>(feature_map_dim(ff.basis_size, pcfg.levels()));
  std::function<VideoFeatureMap(const VideoDescriptorSet&)> featurize;
  if (cfg.mode == "mmk") {
    auto basis = std::make_shared<KernelBasis>(basis_from(cfg, cbf));
    featurize = [basis, pcfg](const VideoDescriptorSet& v) { return video_feature_map(v, *basis, pcfg); };
  } else {
    auto cb = std::make_shared<Codebook>(cbf.codebook());
    featurize = [cb, pcfg](const VideoDescriptorSet& v) { return bof_feature_map(v, *cb, pcfg); };
  }
  for (const auto& v : sets) {
    const VideoFeatureMap fm = featurize(v);
    FeatureRecord rec;
    rec.label = v.meta().label.value_or(kUnlabeled);
    rec.subject = v.meta().subject;
    rec.values.resize(static_cast<std::size_t>(fm.values.size()));
    for (Eigen::Index i = 0; i < fm.values.size(); ++i) rec.values[static_cast<std::size_t>(i)] = static_cast<float>(fm.values[i]);
    ff.records.push_back(std::move(rec));
  }
  write_feature_file(cfg.out, ff);
  ctx.out << "featurize: " << ff.records.size() << " videos, mode=" << cfg.mode << " L=" << ff.levels
          << " dim=" << ff.dim << '\n';
  return 0;
}

LinearParams linear_params(const PipelineConfig& cfg) {
  LinearParams p;
  p.C = cfg.C;
  p.max_epochs = cfg.epochs;
  p.eps = cfg.eps;
  p.seed = cfg.solver_seed;
  return p;
}

FeatureDataset load_features(const PipelineConfig& cfg) {
  FeatureDataset ds = read_feature_file(cfg.features).dataset();
  for (auto label : ds.labels) {
    if (label == kUnlabeled) throw Error(cfg.features + " contains unlabeled videos");
  }
  if (cfg.l2_normalize) l2_normalize(ds);
  return ds;
}

int cmd_train(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const FeatureDataset ds = load_features(cfg);
  const LinearModel model = train_linear_ovr(ds.features, ds.labels, linear_params(cfg));
  write_model(cfg.out, model);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) correct += predict(model, ds.features[i]).label == ds.labels[i];
  ctx.out << "train: " << model.labels.size() << " classes, training accuracy "
          << format_double(static_cast<double>(correct) / static_cast<double>(ds.size())) << '\n';
  return 0;
}

int cmd_predict(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const LinearModel model = read_model(cfg.model);
  FeatureDataset ds = read_feature_file(cfg.features).dataset();
  if (cfg.l2_normalize) l2_normalize(ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ctx.out << i << ' ' << predict(model, ds.features[i]).label << '\n';
  }
  return 0;
}

int cmd_eval(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const FeatureDataset ds = load_features(cfg);
  EvalReport report;
  if (cfg.protocol == "loso") {
    report = evaluate_loso(ds, linear_params(cfg));
  } else if (cfg.protocol == "split") {
    report = evaluate_subject_split(ds, cfg.train_subjects, cfg.runs, cfg.split_seed, linear_params(cfg));
  } else {
    throw Error("--protocol must be split or loso");
  }
  if (!cfg.out.empty()) {
    write_eval_report(cfg.out, report);
  } else {
    ctx.out << format_eval_report(report);
  }
  if (!cfg.confusion_csv.empty()) write_confusion_csv(cfg.confusion_csv, report);
  ctx.out << "eval: protocol=" << report.protocol << " accuracy=" << format_double(report.accuracy)
          << " mean=" << format_double(report.mean_accuracy) << " stddev=" << format_double(report.stddev_accuracy)
          << '\n';
  return 0;
}

int cmd_kernel_check(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto sets = load_descriptor_sets(cfg.manifest);
  const KernelBasis basis = basis_from(cfg, read_codebook_file(cfg.codebook));
  const PyramidConfig pcfg = pyramid_from(cfg);
  std::mt19937_64 rng(cfg.split_seed);
  std::uniform_int_distribution<std::size_t> pick(0, sets.size() - 1);
  double worst = 0.0;
  for (std::size_t p = 0; p < cfg.pairs; ++p) {
    const auto& x = sets[pick(rng)];
    const auto& y = sets[pick(rng)];
    const double via_map = video_feature_map(x, basis, pcfg).values.dot(video_feature_map(y, basis, pcfg).values);
    const double exact = mmk_exact(x, y, basis, pcfg);
    worst = std::max(worst, std::abs(via_map - exact) / std::max(1.0, std::abs(exact)));
  }
  ctx.out << "kernel-check: pairs=" << cfg.pairs << " L=" << pcfg.levels() << " max_relative_deviation "
          << format_double(worst) << " tolerance " << format_double(cfg.tolerance) << '\n';
  if (worst > cfg.tolerance) throw NumericalError("feature-map dot products deviate from the exact kernel");
  return 0;
}

VideoDescriptorSet random_video(std::size_t m, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VideoDescriptorSet v(VideoDims(1, 1, 1), d);
  for (std::size_t i = 0; i < m; ++i) {
    LocatedDescriptor ld;
    ld.loc = {unit(rng), unit(rng), unit(rng)};
    ld.vec = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(d), [&] { return unit(rng); });
    v.add(std::move(ld));
  }
  return v;
}

int cmd_bench(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  std::mt19937_64 rng(cfg.bench_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DescriptorMatrix centers = DescriptorMatrix::NullaryExpr(static_cast<Eigen::Index>(cfg.bench_basis),
                                                           static_cast<Eigen::Index>(cfg.bench_dim),
                                                           [&] { return unit(rng); });
  const KernelBasis basis = build_kernel_basis(Codebook(centers), median_gamma(centers, cfg.bench_seed));
  const PyramidConfig pcfg = PyramidConfig::with_default_weights(cfg.levels);
  const auto time_m = [&](std::size_t m) {
    const VideoDescriptorSet video = random_video(m, cfg.bench_dim, rng);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t rep = 0; rep < std::max<std::size_t>(cfg.bench_reps, 1); ++rep) {
      const auto start = std::chrono::steady_clock::now();
      const VideoFeatureMap fm = video_feature_map(video, basis, pcfg);
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
      if (!fm.values.allFinite()) throw NumericalError("non-finite feature map");
      best = std::min(best, took.count());
    }
    return best;
  };
  const double t1 = time_m(cfg.bench_m);
  const double t2 = time_m(2 * cfg.bench_m);
  const double ratio = t2 / t1;
  ctx.out << std::setprecision(6) << "bench: D=" << cfg.bench_basis << " d=" << cfg.bench_dim << " L=" << cfg.levels
          << " m=" << cfg.bench_m << " " << t1 << "s, m=" << 2 * cfg.bench_m << " " << t2 << "s, ratio " << ratio
          << " (max " << cfg.max_ratio << ")\n";
  if (ratio > cfg.max_ratio) throw Error("featurization time grew faster than linearly in m");
  return 0;
}

}  // namespace

int run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  CLI::App app{"Multiresolution match kernels for video classification", "mmk"};
  app.set_config("--config", "", "TOML/INI file setting any option; command-line values take precedence");
  app.require_subcommand(1);

  const auto descriptor_kind = CLI::IsMember({"hog", "lbp"});
  std::map<std::string, std::string> stages{{"synth", "synth"},       {"extract", "descriptors"},
                                            {"dict", "codebook"},     {"featurize", "featurize"},
                                            {"train", "train"},       {"predict", "predict"},
                                            {"eval", "eval"},         {"kernel-check", "kernel-check"},
                                            {"bench", "bench"}};

  auto* synth = app.add_subcommand("synth", "Generate the synthetic order-sensitive gesture dataset");
  synth->add_option("--out", cfg.out, "Output directory")->required();
  synth->add_option("--samples-per-class", cfg.synth.samples_per_class);
  synth->add_option("--subjects", cfg.synth.subjects);
  synth->add_option("--frames", cfg.synth.frames);
  synth->add_option("--width", cfg.synth.width);
  synth->add_option("--height", cfg.synth.height);
  synth->add_option("--radius", cfg.synth.blob_radius);
  synth->add_option("--prototypes", cfg.synth.prototypes);
  synth->add_option("--dim", cfg.synth.descriptor_dim);
  synth->add_option("--noise", cfg.synth.noise);
  synth->add_option("--seed", cfg.synth.seed);
  synth->add_flag("--render-frames", cfg.render_frames, "Also write PGM frame directories");

  auto* extract = app.add_subcommand("extract", "Frame directories to descriptor files");
  extract->add_option("--manifest", cfg.manifest, "Manifest of frame directories")->required();
  extract->add_option("--out", cfg.out, "Output directory")->required();
  extract->add_option("--descriptor", cfg.descriptor)->check(descriptor_kind);
  extract->add_option("--detector", cfg.detector)->check(CLI::IsMember({"dense", "tdiff"}));
  extract->add_option("--stride", cfg.stride)->check(CLI::PositiveNumber);
  extract->add_option("--top-k", cfg.top_k)->check(CLI::PositiveNumber);

  auto* dict = app.add_subcommand("dict", "Train the k-means codebook");
  dict->add_option("--manifest", cfg.manifest)->required();
  dict->add_option("--out", cfg.out)->required();
  dict->add_option("-D,--codebook-size", cfg.codebook_size)->check(CLI::PositiveNumber);
  dict->add_option("--seed", cfg.codebook_seed);
  dict->add_option("--max-iters", cfg.max_iters)->check(CLI::PositiveNumber);
  dict->add_option("--rel-tol", cfg.rel_tol)->check(CLI::PositiveNumber);
  dict->add_option("--sample-cap", cfg.sample_cap)->check(CLI::PositiveNumber);
  dict->add_option("--gamma", cfg.gamma, "'median' or a fixed RBF bandwidth");
  dict->add_option("--subjects", cfg.dict_subjects, "Train only on these subjects")->delimiter(',');

  auto* featurize = app.add_subcommand("featurize", "Descriptors and codebook to feature maps");
  featurize->add_option("--manifest", cfg.manifest)->required();
  featurize->add_option("--codebook", cfg.codebook)->required();
  featurize->add_option("--out", cfg.out)->required();
  featurize->add_option("--mode", cfg.mode)->check(CLI::IsMember({"mmk", "bof"}));
  featurize->add_option("-L,--levels", cfg.levels)->check(CLI::PositiveNumber);
  featurize->add_option("--weights", cfg.weights, "Per-level feature weights")->delimiter(',');
  featurize->add_option("--lambda", cfg.lambda);
  featurize->add_option("--gamma", cfg.gamma);

  auto* train = app.add_subcommand("train", "Train the one-vs-rest linear classifier");
  train->add_option("--features", cfg.features)->required();
  train->add_option("--out", cfg.out)->required();

  auto* predict_cmd = app.add_subcommand("predict", "Predict labels for a feature file");
  predict_cmd->add_option("--model", cfg.model)->required();
  predict_cmd->add_option("--features", cfg.features)->required();
  predict_cmd->add_flag("--l2-normalize", cfg.l2_normalize);

  auto* eval = app.add_subcommand("eval", "Cross-validated evaluation");
  eval->add_option("--features", cfg.features)->required();
  eval->add_option("--protocol", cfg.protocol)->check(CLI::IsMember({"split", "loso"}));
  eval->add_option("--train-subjects", cfg.train_subjects);
  eval->add_option("--runs", cfg.runs);
  eval->add_option("--seed", cfg.split_seed);
  eval->add_option("--out", cfg.out, "Report file (stdout when omitted)");
  eval->add_option("--confusion", cfg.confusion_csv, "Confusion matrix CSV");

  for (auto* sub : {train, eval}) {
    sub->add_option("-C", cfg.C)->check(CLI::PositiveNumber);
    sub->add_option("--epochs", cfg.epochs)->check(CLI::PositiveNumber);
    sub->add_option("--eps", cfg.eps)->check(CLI::PositiveNumber);
    sub->add_option("--solver-seed", cfg.solver_seed);
    sub->add_flag("--l2-normalize", cfg.l2_normalize);
  }

  auto* check = app.add_subcommand("kernel-check", "Audit feature-map dot products against the exact kernel");
  check->add_option("--manifest", cfg.manifest)->required();
  check->add_option("--codebook", cfg.codebook)->required();
  check->add_option("-L,--levels", cfg.levels)->check(CLI::PositiveNumber);
  check->add_option("--weights", cfg.weights)->delimiter(',');
  check->add_option("--lambda", cfg.lambda);
  check->add_option("--gamma", cfg.gamma);
  check->add_option("--pairs", cfg.pairs);
  check->add_option("--seed", cfg.split_seed);
  check->add_option("--tolerance", cfg.tolerance);

  auto* bench = app.add_subcommand("bench", "Featurization time scaling in m");
  bench->add_option("-m", cfg.bench_m)->check(CLI::PositiveNumber);
  bench->add_option("-D", cfg.bench_basis)->check(CLI::PositiveNumber);
  bench->add_option("-d", cfg.bench_dim)->check(CLI::PositiveNumber);
  bench->add_option("-L,--levels", cfg.levels)->check(CLI::PositiveNumber);
  bench->add_option("--reps", cfg.bench_reps);
  bench->add_option("--seed", cfg.bench_seed);
  bench->add_option("--max-ratio", cfg.max_ratio);

  std::vector<std::string> storage{"mmk"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const Context ctx{cfg, out};
  const std::map<std::string, std::function<int(const Context&)>> commands{
      {"synth", cmd_synth},     {"extract", cmd_extract}, {"dict", cmd_dict},
      {"featurize", cmd_featurize}, {"train", cmd_train},     {"predict", cmd_predict},
      {"eval", cmd_eval},       {"kernel-check", cmd_kernel_check}, {"bench", cmd_bench}};
  try {
    return commands.at(name)(ctx);
  } catch (const std::exception& e) {
    err << "mmk: " << stages.at(name) << " stage failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mmk
