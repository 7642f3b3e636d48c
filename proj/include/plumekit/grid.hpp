#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "plumekit/error.hpp"

namespace plumekit {

// Grid sizes of the two L3 products the toolkit is tuned for.
inline constexpr double kMethaneSatPixelM = 45.0;
inline constexpr double kMethaneAirPixelM = 10.0;

struct GridGeometry {
  int width = 0;
  int height = 0;
  double pixel_size = kMethaneSatPixelM;  // meters, isotropic
  double origin_easting = 0.0;
  double origin_northing = 0.0;

  void validate() const {
    if (width < 1 || height < 1) throw Error("grid geometry: width and height must be >= 1");
    if (!(pixel_size > 0.0)) throw Error("grid geometry: pixel_size must be > 0");
  }
  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < height && col < width;
  }
  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Axis-aligned pixel box: rows [row0, row0+rows), cols [col0, col0+cols).
struct BBox {
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;

  int row_end() const { return row0 + rows; }
  int col_end() const { return col0 + cols; }
  bool empty() const { return rows <= 0 || cols <= 0; }
  bool contains(int r, int c) const { return r >= row0 && r < row_end() && c >= col0 && c < col_end(); }
  bool inside(const GridGeometry& g) const {
    return row0 >= 0 && col0 >= 0 && rows > 0 && cols > 0 && row_end() <= g.height && col_end() <= g.width;
  }
  BBox translated(int dr, int dc) const { return {row0 + dr, col0 + dc, rows, cols}; }

  friend bool operator==(const BBox&, const BBox&) = default;
  friend auto operator<=>(const BBox&, const BBox&) = default;
};

inline BBox bbox_union(const BBox& a, const BBox& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  const int r0 = std::min(a.row0, b.row0);
  const int c0 = std::min(a.col0, b.col0);
  return {r0, c0, std::max(a.row_end(), b.row_end()) - r0, std::max(a.col_end(), b.col_end()) - c0};
}

inline BBox bbox_intersection(const BBox& a, const BBox& b) {
  const int r0 = std::max(a.row0, b.row0);
  const int c0 = std::max(a.col0, b.col0);
  const int r1 = std::min(a.row_end(), b.row_end());
  const int c1 = std::min(a.col_end(), b.col_end());
  if (r1 <= r0 || c1 <= c0) return {r0, c0, 0, 0};
  return {r0, c0, r1 - r0, c1 - c0};
}

// Dense row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw Error("grid: negative dimensions");
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
  }
  Grid(int rows, int cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
      throw Error("grid: data size does not match dimensions");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }

  T& at(int r, int c) {
    check(r, c);
    return data_[index(r, c)];
  }
  const T& at(int r, int c) const {
    check(r, c);
    return data_[index(r, c)];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(int rows, int cols) const { return rows_ == rows && cols_ == cols; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
  }
  void check(int r, int c) const {
    if (r < 0 || c < 0 || r >= rows_ || c >= cols_) throw Error("grid: index out of range");
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using MaskGrid = Grid<std::uint8_t>;

}  // namespace plumekit
