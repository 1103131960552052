#include "segadv/data/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "segadv/error.hpp"

namespace segadv {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > 1'000'000'000) throw ParseError(std::string("netpbm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("netpbm: expected ") + what, start);
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError("netpbm: expected whitespace after maxval", pos_);
    }
    ++pos_;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("netpbm: cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0f, 255.0f)); }

}  // namespace

RasterU8 parse_netpbm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("netpbm: bad magic number, expected P5 or P6", 0);
  }
  RasterU8 r;
  r.channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader hdr(bytes.substr(2));
  r.width = hdr.number("width");
  r.height = hdr.number("height");
  const std::size_t maxval_at = hdr.pos() + 2;
  const std::size_t maxval = hdr.number("maxval");
  if (maxval != 255) throw ParseError("netpbm: unsupported maxval " + std::to_string(maxval), maxval_at);
  if (r.width == 0 || r.height == 0) throw ParseError("netpbm: zero image dimension", 2);
  hdr.single_space();
  const std::size_t data_at = hdr.pos() + 2;
  const std::size_t need = r.width * r.height * r.channels;
  if (bytes.size() - data_at < need) {
    throw ParseError("netpbm: truncated payload, expected " + std::to_string(need) + " bytes, found " +
                         std::to_string(bytes.size() - data_at),
                     bytes.size());
  }
  r.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_at),
                  bytes.begin() + static_cast<std::ptrdiff_t>(data_at + need));
  return r;
}

std::string encode_netpbm(const RasterU8& r) {
  if (r.channels != 1 && r.channels != 3) throw ShapeError("netpbm: raster must have 1 or 3 channels");
  if (r.pixels.size() != r.width * r.height * r.channels) throw ShapeError("netpbm: raster size mismatch");
  std::string out = (r.channels == 3 ? "P6\n" : "P5\n") + std::to_string(r.width) + " " + std::to_string(r.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(r.pixels.data()), r.pixels.size());
  return out;
}

void write_raster(const std::string& path, const RasterU8& raster) {
  const std::string bytes = encode_netpbm(raster);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("netpbm: cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("netpbm: write failed for '" + path + "'");
}

Tensor read_ppm(const std::string& path) {
  const auto r = parse_netpbm(read_file(path));
  if (r.channels != 3) throw ParseError("netpbm: '" + path + "' is not a P6 file", 0);
  Tensor img(Shape{3, r.height, r.width});
  for (std::size_t y = 0; y < r.height; ++y)
    for (std::size_t x = 0; x < r.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = r.pixels[(y * r.width + x) * 3 + c];
  return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_ppm: expected (3, H, W), got " + shape_str(image.shape()));
  RasterU8 r{image.dim(2), image.dim(1), 3, {}};
  r.pixels.resize(r.width * r.height * 3);
  for (std::size_t y = 0; y < r.height; ++y)
    for (std::size_t x = 0; x < r.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) r.pixels[(y * r.width + x) * 3 + c] = to_byte(image.at(c, y, x));
  write_raster(path, r);
}

LabelMap read_pgm(const std::string& path) {
  const auto r = parse_netpbm(read_file(path));
  if (r.channels != 1) throw ParseError("netpbm: '" + path + "' is not a P5 file", 0);
  LabelMap l(r.height, r.width);
  for (std::size_t i = 0; i < l.size(); ++i) l.data[i] = r.pixels[i];
  return l;
}

void write_pgm(const std::string& path, const LabelMap& labels) {
  RasterU8 r{labels.width, labels.height, 1, {}};
  r.pixels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.data[i] < 0 || labels.data[i] > 255) throw DomainError("write_pgm: label outside [0, 255]");
    r.pixels[i] = static_cast<std::uint8_t>(labels.data[i]);
  }
  write_raster(path, r);
}

}  // namespace segadv
