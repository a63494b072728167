#include "mmk/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mmk/error.hpp"

namespace mmk {

namespace {

class ByteWriter {
 public:
  void magic(const char (&tag)[5]) { bytes_.append(tag, 4); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write " + path.string());
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw IngestionError("failed writing " + path.string());
  }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : name_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + name_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void expect_magic(const char (&tag)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, tag, 4) != 0) {
      throw FormatError(name_ + ": bad magic, expected " + std::string(tag, 4));
    }
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& name() const { return name_; }

  void expect_version() {
    const std::uint32_t v = u32();
    if (v != kFormatVersion) throw FormatError(name_ + ": unsupported version " + std::to_string(v));
  }
  // Payload must be exactly `bytes` long.
  void expect_payload(std::uint64_t bytes) const {
    if (remaining() != bytes) {
      throw FormatError(name_ + ": header declares " + std::to_string(bytes) + " payload bytes, file has " +
                        std::to_string(remaining()));
    }
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(name_ + ": truncated file");
  }

  std::string name_;
  std::string bytes_;
  std::size_t pos_ = 0;
};

float finite_f32(ByteReader& in) {
  const float v = in.f32();
  if (!std::isfinite(v)) throw FormatError(in.name() + ": non-finite value");
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError(where + ": bad number '" + s + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError(where + ": bad integer '" + s + "'");
  return v;
}

std::uint32_t parse_u32(const std::string& s, const std::string& where) {
  const std::uint64_t v = parse_uint(s, where);
  if (v > 0xffffffffu) throw FormatError(where + ": value out of range '" + s + "'");
  return static_cast<std::uint32_t>(v);
}

// Sequential reader of "key value..." lines.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : name_(path.string()) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + name_);
    for (std::string line; std::getline(in, line);) lines_.push_back(line);
  }

  // Tokens of the next line, whose first token must be `key`.
  std::vector<std::string> expect(const std::string& key, std::size_t min_values = 1) {
    if (next_ >= lines_.size()) throw FormatError(name_ + ": missing '" + key + "'");
    auto tokens = split_ws(lines_[next_++]);
    if (tokens.empty() || tokens[0] != key || tokens.size() < min_values + 1) {
      throw FormatError(name_ + ": line " + std::to_string(next_) + ": expected '" + key + "'");
    }
    tokens.erase(tokens.begin());
    return tokens;
  }
  std::vector<std::string> next() {
    if (next_ >= lines_.size()) throw FormatError(name_ + ": unexpected end of file");
    return split_ws(lines_[next_++]);
  }
  std::string where() const { return name_ + ":" + std::to_string(next_); }

 private:
  std::string name_;
  std::vector<std::string> lines_;
  std::size_t next_ = 0;
};

void save_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << text;
  if (!out) throw IngestionError("failed writing " + path.string());
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// --- descriptors ----------------------------------------------------------

DescriptorFile read_descriptor_file(const std::filesystem::path& path) {
  ByteReader in(path);
  in.expect_magic("MMKD");
  in.expect_version();
  const std::uint32_t m = in.u32();
  DescriptorFile f;
  f.dim = in.u32();
  const std::uint32_t w = in.u32();
  const std::uint32_t h = in.u32();
  const std::uint32_t t = in.u32();
  try {
    f.dims = VideoDims(w, h, t);
  } catch (const FormatError& e) {
    throw FormatError(in.name() + ": " + e.what());
  }
  in.expect_payload(std::uint64_t{m} * (3 + std::uint64_t{f.dim}) * 4);
  f.records.resize(m);
  for (auto& r : f.records) {
    r.x = finite_f32(in);
    r.y = finite_f32(in);
    r.t = finite_f32(in);
    r.vec.resize(f.dim);
    for (auto& v : r.vec) v = finite_f32(in);
  }
  return f;
}

void write_descriptor_file(const std::filesystem::path& path, const DescriptorFile& file) {
  ByteWriter out;
  out.magic("MMKD");
  out.u32(kFormatVersion);
  out.u32(static_cast<std::uint32_t>(file.records.size()));
  out.u32(file.dim);
  out.u32(file.dims.width);
  out.u32(file.dims.height);
  out.u32(file.dims.frames);
  for (const auto& r : file.records) {
    if (r.vec.size() != file.dim) throw DimensionMismatch("descriptor record length differs from header dimension");
    out.f32(r.x);
    out.f32(r.y);
    out.f32(r.t);
    for (float v : r.vec) out.f32(v);
  }
  out.save(path);
}

VideoDescriptorSet to_descriptor_set(const DescriptorFile& file, VideoMeta meta) {
  VideoDescriptorSet set(file.dims, file.dim, std::move(meta));
  for (const auto& r : file.records) {
    LocatedDescriptor d;
    d.loc = normalize_location(r.x, r.y, r.t, file.dims);
    d.vec.resize(static_cast<Eigen::Index>(r.vec.size()));
    for (std::size_t i = 0; i < r.vec.size(); ++i) d.vec[static_cast<Eigen::Index>(i)] = r.vec[i];
    set.add(std::move(d));
  }
  return set;
}

DescriptorFile to_descriptor_file(const VideoDescriptorSet& set) {
  DescriptorFile f;
  f.dims = set.dims();
  f.dim = static_cast<std::uint32_t>(set.descriptor_dim());
  for (const auto& d : set.descriptors()) {
    DescriptorRecord r;
    r.x = static_cast<float>(d.loc.u * set.dims().width);
    r.y = static_cast<float>(d.loc.v * set.dims().height);
    r.t = static_cast<float>(d.loc.w * set.dims().frames);
    r.vec.assign(d.vec.data(), d.vec.data() + d.vec.size());
    f.records.push_back(std::move(r));
  }
  return f;
}

// --- codebook -------------------------------------------------------------

CodebookFile read_codebook_file(const std::filesystem::path& path) {
  ByteReader in(path);
  in.expect_magic("MMKC");
  in.expect_version();
  const std::uint32_t count = in.u32();
  const std::uint32_t dim = in.u32();
  CodebookFile f;
  f.gamma = in.f64();
  if (!std::isfinite(f.gamma) || f.gamma < 0.0) throw FormatError(in.name() + ": invalid gamma");
  if (count == 0 || dim == 0) throw FormatError(in.name() + ": empty codebook");
  in.expect_payload(std::uint64_t{count} * dim * 4);
  f.centers.resize(count, dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) f.centers(i, j) = finite_f32(in);
  }
  return f;
}

void write_codebook_file(const std::filesystem::path& path, const Codebook& cb, double gamma) {
  ByteWriter out;
  out.magic("MMKC");
  out.u32(kFormatVersion);
  out.u32(static_cast<std::uint32_t>(cb.size()));
  out.u32(static_cast<std::uint32_t>(cb.dim()));
  out.f64(gamma);
  const auto& c = cb.centers();
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) out.f32(static_cast<float>(c(i, j)));
  }
  out.save(path);
}

// --- feature maps ---------------------------------------------------------

FeatureDataset FeatureFile::dataset() const {
  FeatureDataset ds;
  for (const auto& r : records) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(r.values.size()));
    for (std::size_t i = 0; i < r.values.size(); ++i) v[static_cast<Eigen::Index>(i)] = r.values[i];
    ds.features.push_back(std::move(v));
    ds.labels.push_back(r.label);
    ds.subjects.push_back(r.subject);
  }
  return ds;
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
  ByteReader in(path);
  in.expect_magic("MMKF");
  in.expect_version();
  const std::uint32_t count = in.u32();
  FeatureFile f;
  f.dim = in.u32();
  f.levels = in.u32();
  f.basis_size = in.u32();
  in.expect_payload(std::uint64_t{count} * (2 + std::uint64_t{f.dim}) * 4);
  f.records.resize(count);
  for (auto& r : f.records) {
    r.label = in.u32();
    r.subject = in.u32();
    r.values.resize(f.dim);
    for (auto& v : r.values) v = finite_f32(in);
  }
  return f;
}

void write_feature_file(const std::filesystem::path& path, const FeatureFile& file) {
  ByteWriter out;
  out.magic("MMKF");
  out.u32(kFormatVersion);
  out.u32(static_cast<std::uint32_t>(file.records.size()));
  out.u32(file.dim);
  out.u32(file.levels);
  out.u32(file.basis_size);
  for (const auto& r : file.records) {
    if (r.values.size() != file.dim) throw DimensionMismatch("feature record length differs from header dimension");
    out.u32(r.label);
    out.u32(r.subject);
    for (float v : r.values) out.f32(v);
  }
  out.save(path);
}

// --- model ----------------------------------------------------------------

void write_model(const std::filesystem::path& path, const LinearModel& model) {
  std::ostringstream s;
  s << "mmk-linear-model " << kFormatVersion << '\n';
  s << "loss squared_hinge_l2\n";
  s << "C " << format_double(model.params.C) << '\n';
  s << "max_epochs " << model.params.max_epochs << '\n';
  s << "eps " << format_double(model.params.eps) << '\n';
  s << "seed " << model.params.seed << '\n';
  s << "bias_term " << format_double(model.params.bias_term) << '\n';
  s << "dim " << model.dim() << '\n';
  s << "classes " << model.labels.size() << '\n';
  for (std::size_t c = 0; c < model.labels.size(); ++c) {
    const auto row = static_cast<Eigen::Index>(c);
    s << "class " << model.labels[c] << " bias " << format_double(model.biases[row]) << '\n';
    s << "weights";
    for (Eigen::Index j = 0; j < model.weights.cols(); ++j) s << ' ' << format_double(model.weights(row, j));
    s << '\n';
  }
  save_text(path, s.str());
}

LinearModel read_model(const std::filesystem::path& path) {
  LineReader in(path);
  const auto header = in.expect("mmk-linear-model");
  if (parse_uint(header[0], in.where()) != kFormatVersion) throw FormatError(in.where() + ": unsupported version");
  if (in.expect("loss")[0] != "squared_hinge_l2") throw FormatError(in.where() + ": unsupported loss");
  LinearModel m;
  m.params.C = parse_double(in.expect("C")[0], in.where());
  m.params.max_epochs = parse_uint(in.expect("max_epochs")[0], in.where());
  m.params.eps = parse_double(in.expect("eps")[0], in.where());
  m.params.seed = parse_uint(in.expect("seed")[0], in.where());
  m.params.bias_term = parse_double(in.expect("bias_term")[0], in.where());
  const auto dim = static_cast<Eigen::Index>(parse_uint(in.expect("dim")[0], in.where()));
  const auto classes = static_cast<Eigen::Index>(parse_uint(in.expect("classes")[0], in.where()));
  m.weights.resize(classes, dim);
  m.biases.resize(classes);
  for (Eigen::Index c = 0; c < classes; ++c) {
    const auto cls = in.expect("class", 3);
    m.labels.push_back(parse_u32(cls[0], in.where()));
    if (cls[1] != "bias") throw FormatError(in.where() + ": expected 'bias'");
    m.biases[c] = parse_double(cls[2], in.where());
    const auto w = in.expect("weights", 0);
    if (static_cast<Eigen::Index>(w.size()) != dim) throw FormatError(in.where() + ": weight count != dim");
    for (Eigen::Index j = 0; j < dim; ++j) m.weights(c, j) = parse_double(w[static_cast<std::size_t>(j)], in.where());
  }
  m.objective_history.resize(static_cast<std::size_t>(classes));
  return m;
}

// --- evaluation report ----------------------------------------------------

std::string format_eval_report(const EvalReport& r) {
  std::ostringstream s;
  s << "mmk-eval-report " << kFormatVersion << '\n';
  s << "protocol " << r.protocol << '\n';
  s << "classes";
  for (auto c : r.classes) s << ' ' << c;
  s << '\n';
  s << "runs " << r.runs.size() << '\n';
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const auto& run = r.runs[i];
    s << "run " << i << " correct " << run.correct << " total " << run.total << " accuracy "
      << format_double(run.accuracy()) << " test_subjects";
    for (auto subj : run.test_subjects) s << ' ' << subj;
    s << '\n';
  }
  s << "accuracy " << format_double(r.accuracy) << '\n';
  s << "mean_accuracy " << format_double(r.mean_accuracy) << '\n';
  s << "stddev_accuracy " << format_double(r.stddev_accuracy) << '\n';
  s << "confusion " << r.confusion.rows() << '\n';
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) s << (j ? " " : "") << r.confusion(i, j);
    s << '\n';
  }
  return s.str();
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  save_text(path, format_eval_report(report));
}

EvalReport read_eval_report(const std::filesystem::path& path) {
  LineReader in(path);
  if (parse_uint(in.expect("mmk-eval-report")[0], in.where()) != kFormatVersion) {
    throw FormatError(in.where() + ": unsupported version");
  }
  EvalReport r;
  r.protocol = in.expect("protocol")[0];
  for (const auto& c : in.expect("classes", 0)) r.classes.push_back(parse_u32(c, in.where()));
  const auto runs = parse_uint(in.expect("runs")[0], in.where());
  for (std::uint64_t i = 0; i < runs; ++i) {
    const auto t = in.expect("run", 8);
    if (t[1] != "correct" || t[3] != "total" || t[5] != "accuracy" || t[7] != "test_subjects") {
      throw FormatError(in.where() + ": malformed run line");
    }
    RunResult run;
    run.correct = parse_uint(t[2], in.where());
    run.total = parse_uint(t[4], in.where());
    for (std::size_t k = 8; k < t.size(); ++k) run.test_subjects.push_back(parse_u32(t[k], in.where()));
    r.runs.push_back(std::move(run));
  }
  r.accuracy = parse_double(in.expect("accuracy")[0], in.where());
  r.mean_accuracy = parse_double(in.expect("mean_accuracy")[0], in.where());
  r.stddev_accuracy = parse_double(in.expect("stddev_accuracy")[0], in.where());
  const auto n = static_cast<Eigen::Index>(parse_uint(in.expect("confusion")[0], in.where()));
  if (n != static_cast<Eigen::Index>(r.classes.size())) throw FormatError(in.where() + ": confusion size != classes");
  r.confusion.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = in.next();
    if (static_cast<Eigen::Index>(row.size()) != n) throw FormatError(in.where() + ": confusion row length != classes");
    for (Eigen::Index j = 0; j < n; ++j) r.confusion(i, j) = parse_uint(row[static_cast<std::size_t>(j)], in.where());
  }
  return r;
}

void write_confusion_csv(const std::filesystem::path& path, const EvalReport& r) {
  std::ostringstream s;
  s << "true\\predicted";
  for (auto c : r.classes) s << ',' << c;
  s << '\n';
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    s << r.classes[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) s << ',' << r.confusion(i, j);
    s << '\n';
  }
  save_text(path, s.str());
}

// --- manifest -------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tokens.size() != 3) throw FormatError(where + ": expected '<path> <label|-> <subject>'");
    ManifestEntry e;
    e.path = tokens[0];
    if (e.path.is_relative()) e.path = base / e.path;
    if (tokens[1] != "-") e.label = parse_u32(tokens[1], where);
    e.subject = parse_u32(tokens[2], where);
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ostringstream s;
  for (const auto& e : entries) {
    s << e.path.generic_string() << ' ' << (e.label ? std::to_string(*e.label) : std::string("-")) << ' ' << e.subject
      << '\n';
  }
  save_text(path, s.str());
}

}  // namespace mmk
