#pragma once

// Netpbm graymap I/O. Reads binary (P5) and ASCII (P2) 8-bit files, writes P5.

#include <sepdict/core.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace sepdict {

/// Grayscale raster; pixels(row, col) nominally in [0, 255].
class GrayImage {
 public:
  GrayImage() = default;
  explicit GrayImage(Matrix pixels) : pixels_(std::move(pixels)) {
    require(pixels_.rows() >= 1 && pixels_.cols() >= 1, "GrayImage: empty image");
  }
  GrayImage(Index height, Index width, double fill = 0.0)
      : GrayImage(Matrix::Constant(height, width, fill)) {}

  Index height() const { return pixels_.rows(); }
  Index width() const { return pixels_.cols(); }
  Index size() const { return pixels_.size(); }
  const Matrix& pixels() const { return pixels_; }
  Matrix& pixels() { return pixels_; }
  double operator()(Index r, Index c) const { return pixels_(r, c); }
  double& operator()(Index r, Index c) { return pixels_(r, c); }

 private:
  Matrix pixels_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

inline long read_pnm_int(std::istream& in) {
  skip_pnm_space(in);
  long v = -1;
  if (!(in >> v)) throw IoError("PGM: malformed header");
  return v;
}

}  // namespace detail

inline GrayImage read_pgm(std::istream& in) {
  char magic[2] = {0, 0};
  if (!in.read(magic, 2) || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '2')) {
    throw IoError("PGM: expected P5 or P2 magic");
  }
  const long width = detail::read_pnm_int(in);
  const long height = detail::read_pnm_int(in);
  const long maxval = detail::read_pnm_int(in);
  if (width <= 0 || height <= 0) throw IoError("PGM: bad dimensions");
  if (maxval <= 0 || maxval > 255) throw IoError("PGM: only 8-bit maxval is supported");

  Matrix px(height, width);
  if (magic[1] == '5') {
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> buf(static_cast<std::size_t>(width * height));
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw IoError("PGM: truncated pixel data");
    }
    for (long r = 0; r < height; ++r)
      for (long c = 0; c < width; ++c) px(r, c) = buf[static_cast<std::size_t>(r * width + c)];
  } else {
    for (long r = 0; r < height; ++r) {
      for (long c = 0; c < width; ++c) {
        const long v = detail::read_pnm_int(in);
        if (v < 0 || v > maxval) throw IoError("PGM: pixel value out of range");
        px(r, c) = static_cast<double>(v);
      }
    }
  }
  if (maxval != 255) px *= 255.0 / static_cast<double>(maxval);
  return GrayImage(std::move(px));
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_pgm(in);
}

/// Rounds to the nearest integer and clips to [0, 255].
inline unsigned char to_byte(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<unsigned char>(std::lround(v));
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(img.size()));
  for (Index r = 0; r < img.height(); ++r)
    for (Index c = 0; c < img.width(); ++c)
      buf[static_cast<std::size_t>(r * img.width() + c)] = to_byte(img(r, c));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("PGM: write failed");
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_pgm(out, img);
}

}  // namespace sepdict
