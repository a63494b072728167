#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "mmk/descriptors.hpp"
#include "mmk/error.hpp"

namespace mmk {

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
unsigned long next_header_value(const std::string& buf, std::size_t& pos, const std::string& name) {
  while (pos < buf.size()) {
    const auto c = static_cast<unsigned char>(buf[pos]);
    if (std::isspace(c)) {
      ++pos;
    } else if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) ++pos;
  if (start == pos) throw FormatError(name + ": malformed PGM header");
  return std::stoul(buf.substr(start, pos - start));
}

}  // namespace

double GrayImage::clamped(long x, long y) const {
  x = std::clamp<long>(x, 0, static_cast<long>(width) - 1);
  y = std::clamp<long>(y, 0, static_cast<long>(height) - 1);
  return at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open frame " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5') {
    throw IngestionError(name + ": not a binary PGM (P5) file");
  }
  std::size_t pos = 2;
  const auto width = next_header_value(buf, pos, name);
  const auto height = next_header_value(buf, pos, name);
  const auto maxval = next_header_value(buf, pos, name);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw IngestionError(name + ": invalid PGM header values");
  }
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) {
    throw IngestionError(name + ": truncated PGM header");
  }
  ++pos;
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t count = width * height;
  if (buf.size() - pos < count * bytes_per_sample) {
    throw IngestionError(name + ": truncated PGM pixel data");
  }
  GrayImage img(static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(height));
  const auto* data = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned sample = bytes_per_sample == 2 ? (unsigned{data[2 * i]} << 8) | data[2 * i + 1] : data[i];
    if (sample > maxval) throw IngestionError(name + ": sample exceeds declared maxval");
    img.pixels[i] = sample * scale;
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img, std::uint16_t maxval) {
  if (maxval == 0) throw Error("PGM maxval must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << '\n' << maxval << '\n';
  std::string data;
  data.reserve(img.pixels.size() * 2);
  for (double p : img.pixels) {
    const auto s = static_cast<unsigned>(std::lround(std::clamp(p, 0.0, 1.0) * maxval));
    if (maxval > 255) data.push_back(static_cast<char>(s >> 8));
    data.push_back(static_cast<char>(s & 0xff));
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IngestionError("failed writing " + path.string());
}

}  // namespace mmk
