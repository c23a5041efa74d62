#pragma once

// SEDL dictionary files and atom mosaics.
//
// Layout (all integers and floats little-endian):
//   bytes 0..3   "SEDL"
//   bytes 4..5   u16 version = 1
//   bytes 6..21  u32 h, w, a, b
//   payload      f64 A (h*a values, column-major) then B (w*b values)

#include <sepdict/core.hpp>
#include <sepdict/manifold.hpp>
#include <sepdict/optimizer.hpp>
#include <sepdict/pgm.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace sepdict {

inline constexpr std::array<char, 4> kDictionaryMagic = {'S', 'E', 'D', 'L'};
inline constexpr std::uint16_t kDictionaryVersion = 1;

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& buf, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(v);
  for (std::size_t k = 0; k < sizeof(T); ++k) buf.push_back(static_cast<unsigned char>(bits >> (8 * k)));
}

template <class T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) bits |= static_cast<U>(p[k]) << (8 * k);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline std::vector<unsigned char> encode_dictionary(const DictionaryPair& d) {
  std::vector<unsigned char> buf(kDictionaryMagic.begin(), kDictionaryMagic.end());
  detail::put_le(buf, kDictionaryVersion);
  for (Index v : {d.a.rows(), d.b.rows(), d.a.cols(), d.b.cols()}) {
    detail::put_le(buf, static_cast<std::uint32_t>(v));
  }
  for (const Matrix* m : {&d.a.matrix(), &d.b.matrix()}) {
    for (Index k = 0; k < m->size(); ++k) detail::put_le(buf, m->data()[k]);
  }
  return buf;
}

inline DictionaryPair decode_dictionary(const std::vector<unsigned char>& buf) {
  constexpr std::size_t header = 22;
  if (buf.size() < header || !std::equal(kDictionaryMagic.begin(), kDictionaryMagic.end(), buf.begin())) {
    throw IoError("dictionary: bad magic");
  }
  const auto version = detail::get_le<std::uint16_t>(buf.data() + 4);
  if (version != kDictionaryVersion) {
    throw IoError("dictionary: unsupported version " + std::to_string(version));
  }
  const auto h = detail::get_le<std::uint32_t>(buf.data() + 6);
  const auto w = detail::get_le<std::uint32_t>(buf.data() + 10);
  const auto a = detail::get_le<std::uint32_t>(buf.data() + 14);
  const auto b = detail::get_le<std::uint32_t>(buf.data() + 18);
  if (h == 0 || w == 0 || a == 0 || b == 0) throw IoError("dictionary: zero dimension");
  const std::uint64_t values = std::uint64_t{h} * a + std::uint64_t{w} * b;
  if (buf.size() - header != 8 * values) throw IoError("dictionary: payload length mismatch");

  const unsigned char* p = buf.data() + header;
  auto read_matrix = [&p](std::uint32_t rows, std::uint32_t cols) {
    Matrix m(rows, cols);
    for (Index k = 0; k < m.size(); ++k, p += 8) m.data()[k] = detail::get_le<double>(p);
    return m;
  };
  Matrix ma = read_matrix(h, a);
  Matrix mb = read_matrix(w, b);
  try {
    return {ObliquePoint::from_unit_columns(std::move(ma)), ObliquePoint::from_unit_columns(std::move(mb))};
  } catch (const Error& e) {
    throw IoError(std::string("dictionary: ") + e.what());
  }
}

inline void write_dictionary(const std::string& path, const DictionaryPair& d) {
  const auto buf = encode_dictionary(d);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("dictionary: write failed");
}

inline DictionaryPair read_dictionary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dictionary(buf);
}

/// Gray-level mapping of one atom: min -> 0, 0 -> 128, max -> 255, linear on
/// each side of zero.
inline Matrix scale_tile(const Matrix& t) {
  const double lo = std::min(0.0, t.minCoeff());
  const double hi = std::max(0.0, t.maxCoeff());
  return t.unaryExpr([lo, hi](double v) {
    if (v < 0.0) return 128.0 * (1.0 - v / lo);
    if (v > 0.0) return 128.0 + 127.0 * v / hi;
    return 128.0;
  });
}

struct Mosaic {
  GrayImage image;
  Index tiles = 0;
};

/// Renders every atom as a patch-sized tile separated by one white pixel.
/// Separable pairs give an a x b grid of a_i b_j^T; an unstructured pair
/// (B = [1]) gives one tile per column of A in a near-square grid.
inline Mosaic atom_mosaic(const DictionaryPair& d) {
  Index th = d.a.rows();
  Index tw = d.b.rows();
  Index grid_r = d.a.cols();
  Index grid_c = d.b.cols();
  const bool unstructured = d.b.rows() == 1 && d.b.cols() == 1;
  if (unstructured) {
    const auto side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(d.a.rows()))));
    if (side * side == d.a.rows()) th = tw = side;
    else tw = 1;
    grid_c = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(d.a.cols()))));
    grid_r = (d.a.cols() + grid_c - 1) / grid_c;
  }
  GrayImage img(grid_r * (th + 1) + 1, grid_c * (tw + 1) + 1, 255.0);
  Index tiles = 0;
  auto place = [&](Index gr, Index gc, const Matrix& tile) {
    img.pixels().block(1 + gr * (th + 1), 1 + gc * (tw + 1), th, tw) = scale_tile(tile);
    ++tiles;
  };
  if (unstructured) {
    for (Index k = 0; k < d.a.cols(); ++k) {
      place(k / grid_c, k % grid_c, d.b.matrix()(0, 0) * d.a.col(k).reshaped(th, tw));
    }
  } else {
    for (Index i = 0; i < d.a.cols(); ++i)
      for (Index j = 0; j < d.b.cols(); ++j) place(i, j, d.a.col(i) * d.b.col(j).transpose());
  }
  return {std::move(img), tiles};
}

}  // namespace sepdict
