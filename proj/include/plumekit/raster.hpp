#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "plumekit/grid.hpp"

namespace plumekit {

// Value written into normalized patches wherever the input pixel is invalid.
inline constexpr double kInvalidSentinel = -10.0;

// Below this population standard deviation a patch is treated as constant.
inline constexpr double kZeroVarianceStd = 1e-12;

// A georeferenced XCH4 raster (ppb) with its validity mask and optional albedo.
// Immutable by convention once built; validate() checks the cross-array invariants.
struct SceneGrid {
  GridGeometry geometry;
  Grid<float> xch4;
  MaskGrid valid;
  std::optional<Grid<float>> albedo;

  static SceneGrid filled(const GridGeometry& geometry, float value);

  void validate() const;
  std::size_t valid_count() const;
  bool has_albedo() const { return albedo.has_value(); }
};

// A binary instance mask stored over its tight bounding box in scene coordinates.
// An empty mask (area 0) has an empty bbox.
class BinaryMask {
 public:
  BinaryMask() = default;

  // Takes the foreground of `bits` (row-major over `box`) and tightens the box.
  static BinaryMask from_bits(const BBox& box, std::span<const std::uint8_t> bits);
  // Foreground of a dense grid whose (0,0) sits at scene pixel (row0, col0).
  static BinaryMask from_grid(const MaskGrid& grid, int row0 = 0, int col0 = 0);
  static BinaryMask from_pixels(std::span<const Pixel> pixels);

  const BBox& bbox() const { return box_; }
  std::size_t area() const { return area_; }
  bool empty() const { return area_ == 0; }

  bool contains(int row, int col) const {
    if (!box_.contains(row, col)) return false;
    return bits_[local_index(row, col)] != 0;
  }
  // Row-major foreground flags over bbox().
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::vector<Pixel> pixels() const;
  MaskGrid to_grid(const GridGeometry& geometry) const;

  BinaryMask translated(int drow, int dcol) const;

  std::size_t intersection_area(const BinaryMask& other) const;
  bool intersects(const BinaryMask& other) const;
  static BinaryMask union_of(std::span<const BinaryMask* const> masks);

  std::size_t local_index(int row, int col) const {
    return static_cast<std::size_t>(row - box_.row0) * static_cast<std::size_t>(box_.cols) +
           static_cast<std::size_t>(col - box_.col0);
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  BBox box_{};
  std::vector<std::uint8_t> bits_;
  std::size_t area_ = 0;
};

// A normalized square crop of a scene, remembering where it came from.
struct Patch {
  Pixel origin;
  int size = 0;
  Grid<double> values;  // z-scored; kInvalidSentinel at invalid pixels
  MaskGrid valid;
};

// Z-score over valid pixels (population std); invalid pixels become kInvalidSentinel.
Grid<double> normalize(const Grid<double>& values, const MaskGrid& valid);

Patch extract_patch(const SceneGrid& scene, Pixel origin, int size);

// Copies the size x size window at `origin` through `read(row, col)`. extract_patch is
// built on this so the access pattern can be checked with an instrumented reader.
template <typename Reader>
void crop_window(int scene_rows, int scene_cols, Pixel origin, int size, Reader&& read) {
  if (size < 1) throw Error("extract_patch: size must be >= 1");
  if (origin.row < 0 || origin.col < 0 || origin.row + size > scene_rows || origin.col + size > scene_cols)
    throw Error("extract_patch: window out of bounds");
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) read(origin.row + r, origin.col + c, r, c);
}

// Row-major run lengths alternating background/foreground, starting with background.
std::vector<std::uint32_t> rle_encode(const MaskGrid& mask);
MaskGrid rle_decode(std::span<const std::uint32_t> runs, int rows, int cols);

// {"bbox":[row0,col0,rows,cols],"rle":[...]}
nlohmann::json mask_to_json(const BinaryMask& mask);
BinaryMask mask_from_json(const nlohmann::json& j);

// SGRID v1: JSON header line, then row-major little-endian channel payloads.
void save_scene(const SceneGrid& scene, const std::filesystem::path& path);
SceneGrid load_scene(const std::filesystem::path& path);

namespace detail {
void write_f32_le(std::vector<char>& out, std::span<const float> values);
void read_f32_le(std::span<const char> in, std::span<float> values);
// Reads the header line and the remaining payload; errors name the path.
nlohmann::json read_header_and_payload(const std::filesystem::path& path, std::vector<char>& payload);
}  // namespace detail

}  // namespace plumekit
