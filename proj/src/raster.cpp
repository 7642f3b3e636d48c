#include "plumekit/raster.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace plumekit {

using nlohmann::json;

namespace {

constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 30;

}  // namespace

SceneGrid SceneGrid::filled(const GridGeometry& geometry, float value) {
  geometry.validate();
  SceneGrid s;
  s.geometry = geometry;
  s.xch4 = Grid<float>(geometry.height, geometry.width, value);
  s.valid = MaskGrid(geometry.height, geometry.width, 1);
  return s;
}

void SceneGrid::validate() const {
  geometry.validate();
  if (!xch4.same_shape(geometry.height, geometry.width) || !valid.same_shape(geometry.height, geometry.width))
    throw Error("scene: channel dimensions do not match geometry");
  if (albedo && !albedo->same_shape(geometry.height, geometry.width))
    throw Error("scene: albedo dimensions do not match geometry");
  for (std::size_t i = 0; i < xch4.size(); ++i) {
    if (!valid.data()[i]) continue;
    if (!std::isfinite(xch4.data()[i])) throw Error("scene: non-finite xch4 at a valid pixel");
    if (albedo) {
      const float a = albedo->data()[i];
      if (!(a >= 0.0f && a <= 1.0f)) throw Error("scene: albedo outside [0,1] at a valid pixel");
    }
  }
}

std::size_t SceneGrid::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid.data()) n += v != 0;
  return n;
}

// ---------------------------------------------------------------- BinaryMask

BinaryMask BinaryMask::from_bits(const BBox& box, std::span<const std::uint8_t> bits) {
  if (bits.size() != static_cast<std::size_t>(std::max(box.rows, 0)) * static_cast<std::size_t>(std::max(box.cols, 0)))
    throw Error("mask: bit count does not match bbox");
  int rmin = std::numeric_limits<int>::max(), rmax = -1, cmin = std::numeric_limits<int>::max(), cmax = -1;
  for (int r = 0; r < box.rows; ++r)
    for (int c = 0; c < box.cols; ++c)
      if (bits[static_cast<std::size_t>(r) * box.cols + c]) {
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
      }
  BinaryMask m;
  if (rmax < 0) return m;
  m.box_ = {box.row0 + rmin, box.col0 + cmin, rmax - rmin + 1, cmax - cmin + 1};
  m.bits_.assign(static_cast<std::size_t>(m.box_.rows) * m.box_.cols, 0);
  for (int r = rmin; r <= rmax; ++r)
    for (int c = cmin; c <= cmax; ++c) {
      const std::uint8_t b = bits[static_cast<std::size_t>(r) * box.cols + c] ? 1 : 0;
      m.bits_[static_cast<std::size_t>(r - rmin) * m.box_.cols + (c - cmin)] = b;
      m.area_ += b;
    }
  return m;
}

BinaryMask BinaryMask::from_grid(const MaskGrid& grid, int row0, int col0) {
  return from_bits({row0, col0, grid.rows(), grid.cols()}, grid.data());
}

BinaryMask BinaryMask::from_pixels(std::span<const Pixel> pixels) {
  if (pixels.empty()) return {};
  BBox box{pixels[0].row, pixels[0].col, 1, 1};
  for (const auto& p : pixels) box = bbox_union(box, {p.row, p.col, 1, 1});
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(box.rows) * box.cols, 0);
  for (const auto& p : pixels) bits[static_cast<std::size_t>(p.row - box.row0) * box.cols + (p.col - box.col0)] = 1;
  return from_bits(box, bits);
}

std::vector<Pixel> BinaryMask::pixels() const {
  std::vector<Pixel> out;
  out.reserve(area_);
  for (int r = 0; r < box_.rows; ++r)
    for (int c = 0; c < box_.cols; ++c)
      if (bits_[static_cast<std::size_t>(r) * box_.cols + c]) out.push_back({box_.row0 + r, box_.col0 + c});
  return out;
}

MaskGrid BinaryMask::to_grid(const GridGeometry& geometry) const {
  MaskGrid g(geometry.height, geometry.width, 0);
  for (const auto& p : pixels()) {
    if (!geometry.contains(p.row, p.col)) throw Error("mask: pixel outside geometry");
    g(p.row, p.col) = 1;
  }
  return g;
}

BinaryMask BinaryMask::translated(int drow, int dcol) const {
  BinaryMask m = *this;
  if (!m.empty()) m.box_ = box_.translated(drow, dcol);
  return m;
}

std::size_t BinaryMask::intersection_area(const BinaryMask& other) const {
  if (empty() || other.empty()) return 0;
  const BBox ov = bbox_intersection(box_, other.box_);
  if (ov.empty()) return 0;
  std::size_t n = 0;
  for (int r = ov.row0; r < ov.row_end(); ++r) {
    const std::uint8_t* a = &bits_[local_index(r, ov.col0)];
    const std::uint8_t* b = &other.bits_[other.local_index(r, ov.col0)];
    for (int c = 0; c < ov.cols; ++c) n += (a[c] & b[c]);
  }
  return n;
}

bool BinaryMask::intersects(const BinaryMask& other) const {
  if (empty() || other.empty()) return false;
  const BBox ov = bbox_intersection(box_, other.box_);
  if (ov.empty()) return false;
  for (int r = ov.row0; r < ov.row_end(); ++r) {
    const std::uint8_t* a = &bits_[local_index(r, ov.col0)];
    const std::uint8_t* b = &other.bits_[other.local_index(r, ov.col0)];
    for (int c = 0; c < ov.cols; ++c)
      if (a[c] & b[c]) return true;
  }
  return false;
}

BinaryMask BinaryMask::union_of(std::span<const BinaryMask* const> masks) {
  BBox box{};
  for (const BinaryMask* m : masks)
    if (!m->empty()) box = bbox_union(box, m->bbox());
  if (box.empty()) return {};
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(box.rows) * box.cols, 0);
  for (const BinaryMask* m : masks) {
    if (m->empty()) continue;
    const BBox& b = m->bbox();
    for (int r = 0; r < b.rows; ++r) {
      std::uint8_t* dst = &bits[static_cast<std::size_t>(b.row0 - box.row0 + r) * box.cols + (b.col0 - box.col0)];
      const std::uint8_t* src = &m->bits()[static_cast<std::size_t>(r) * b.cols];
      for (int c = 0; c < b.cols; ++c) dst[c] |= src[c];
    }
  }
  return from_bits(box, bits);
}

// ---------------------------------------------------------------- normalize / patches

Grid<double> normalize(const Grid<double>& values, const MaskGrid& valid) {
  if (!values.same_shape(valid)) throw Error("normalize: values and valid mask differ in shape");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (valid.data()[i]) {
      sum += values.data()[i];
      ++n;
    }
  if (n == 0) throw Error("empty patch");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (valid.data()[i]) {
      const double d = values.data()[i] - mean;
      ss += d * d;
    }
  const double sd = std::sqrt(ss / static_cast<double>(n));

  Grid<double> out(values.rows(), values.cols(), kInvalidSentinel);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!valid.data()[i]) continue;
    out.data()[i] = sd < kZeroVarianceStd ? 0.0 : (values.data()[i] - mean) / sd;
  }
  return out;
}

Patch extract_patch(const SceneGrid& scene, Pixel origin, int size) {
  Grid<double> raw(std::max(size, 0), std::max(size, 0), 0.0);
  MaskGrid valid(std::max(size, 0), std::max(size, 0), 0);
  crop_window(scene.geometry.height, scene.geometry.width, origin, size, [&](int sr, int sc, int pr, int pc) {
    raw(pr, pc) = scene.xch4(sr, sc);
    valid(pr, pc) = scene.valid(sr, sc);
  });
  Patch p;
  p.origin = origin;
  p.size = size;
  p.values = normalize(raw, valid);
  p.valid = std::move(valid);
  return p;
}

// ---------------------------------------------------------------- RLE

std::vector<std::uint32_t> rle_encode(const MaskGrid& mask) {
  if (mask.empty()) throw Error("rle_encode: empty array");
  std::vector<std::uint32_t> runs;
  std::uint8_t current = 0;
  std::uint32_t len = 0;
  for (auto v : mask.data()) {
    const std::uint8_t b = v ? 1 : 0;
    if (b == current) {
      ++len;
    } else {
      runs.push_back(len);
      current = b;
      len = 1;
    }
  }
  runs.push_back(len);
  return runs;
}

MaskGrid rle_decode(std::span<const std::uint32_t> runs, int rows, int cols) {
  if (rows < 1 || cols < 1) throw Error("rle_decode: dimensions must be >= 1");
  const std::uint64_t expected = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols);
  std::uint64_t total = 0;
  for (auto r : runs) total += r;
  if (total != expected) throw Error("corrupt RLE");
  MaskGrid g(rows, cols, 0);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (auto r : runs) {
    std::fill_n(g.data().begin() + static_cast<std::ptrdiff_t>(pos), r, value);
    pos += r;
    value ^= 1;
  }
  return g;
}

json mask_to_json(const BinaryMask& mask) {
  if (mask.empty()) throw Error("mask_to_json: empty mask");
  const BBox& b = mask.bbox();
  MaskGrid local(b.rows, b.cols, mask.bits());
  return json{{"bbox", {b.row0, b.col0, b.rows, b.cols}}, {"rle", rle_encode(local)}};
}

BinaryMask mask_from_json(const json& j) {
  try {
    const auto& jb = j.at("bbox");
    if (!jb.is_array() || jb.size() != 4) throw Error("mask json: bbox must have 4 entries");
    const BBox box{jb[0].get<int>(), jb[1].get<int>(), jb[2].get<int>(), jb[3].get<int>()};
    if (box.rows < 1 || box.cols < 1) throw Error("mask json: bbox must be non-empty");
    const auto runs = j.at("rle").get<std::vector<std::uint32_t>>();
    MaskGrid local = rle_decode(runs, box.rows, box.cols);
    BinaryMask m = BinaryMask::from_grid(local, box.row0, box.col0);
    if (m.empty()) throw Error("mask json: mask has zero area");
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string("mask json: ") + e.what());
  }
}

// ---------------------------------------------------------------- SGRID I/O

namespace detail {

void write_f32_le(std::vector<char>& out, std::span<const float> values) {
  const std::size_t base = out.size();
  out.resize(base + values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int k = 0; k < 4; ++k) out[base + i * 4 + k] = static_cast<char>((bits >> (8 * k)) & 0xFFu);
  }
}

void read_f32_le(std::span<const char> in, std::span<float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[i * 4 + k])) << (8 * k);
    values[i] = std::bit_cast<float>(bits);
  }
}

json read_header_and_payload(const std::filesystem::path& path, std::vector<char>& payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string header;
  if (!std::getline(in, header)) throw Error("'" + path.string() + "': missing header line");
  if (in.eof()) throw Error("'" + path.string() + "': header not newline-terminated");
  payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  try {
    return json::parse(header);
  } catch (const json::exception& e) {
    throw Error("'" + path.string() + "': malformed header: " + e.what());
  }
}

}  // namespace detail

void save_scene(const SceneGrid& scene, const std::filesystem::path& path) {
  scene.validate();
  const auto& g = scene.geometry;
  json channels = json::array({"xch4", "valid"});
  if (scene.albedo) channels.push_back("albedo");
  json header{{"magic", "SGRID"},
              {"version", 1},
              {"width", g.width},
              {"height", g.height},
              {"pixel_size_m", g.pixel_size},
              {"origin_m", {g.origin_easting, g.origin_northing}},
              {"channels", channels}};
  std::vector<char> buf;
  const std::string h = header.dump() + "\n";
  buf.insert(buf.end(), h.begin(), h.end());
  detail::write_f32_le(buf, scene.xch4.data());
  for (auto v : scene.valid.data()) buf.push_back(v ? 1 : 0);
  if (scene.albedo) detail::write_f32_le(buf, scene.albedo->data());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

SceneGrid load_scene(const std::filesystem::path& path) {
  std::vector<char> payload;
  const json header = detail::read_header_and_payload(path, payload);
  const std::string where = "'" + path.string() + "': ";
  SceneGrid s;
  std::vector<std::string> channels;
  try {
    if (header.at("magic").get<std::string>() != "SGRID") throw Error(where + "magic mismatch");
    if (header.at("version").get<int>() != 1) throw Error(where + "unsupported version");
    const auto w = header.at("width").get<std::int64_t>();
    const auto h = header.at("height").get<std::int64_t>();
    if (w < 1 || h < 1 || w > std::numeric_limits<int>::max() || h > std::numeric_limits<int>::max() ||
        static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h) > kMaxPixels)
      throw Error(where + "dimension overflow");
    s.geometry.width = static_cast<int>(w);
    s.geometry.height = static_cast<int>(h);
    s.geometry.pixel_size = header.at("pixel_size_m").get<double>();
    if (header.contains("origin_m")) {
      s.geometry.origin_easting = header["origin_m"].at(0).get<double>();
      s.geometry.origin_northing = header["origin_m"].at(1).get<double>();
    }
    channels = header.at("channels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(where + "invalid header: " + e.what());
  }
  s.geometry.validate();
  if (channels.size() < 2 || channels[0] != "xch4" || channels[1] != "valid" ||
      (channels.size() == 3 && channels[2] != "albedo") || channels.size() > 3)
    throw Error(where + "unsupported channel list");

  const std::size_t n = static_cast<std::size_t>(s.geometry.width) * s.geometry.height;
  const std::size_t need = n * 4 + n + (channels.size() == 3 ? n * 4 : 0);
  if (payload.size() < need) throw Error(where + "truncated payload");
  if (payload.size() > need) throw Error(where + "trailing bytes after payload");

  std::span<const char> rest(payload);
  s.xch4 = Grid<float>(s.geometry.height, s.geometry.width, 0.0f);
  detail::read_f32_le(rest.first(n * 4), s.xch4.data());
  rest = rest.subspan(n * 4);
  s.valid = MaskGrid(s.geometry.height, s.geometry.width, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = static_cast<unsigned char>(rest[i]);
    if (b > 1) throw Error(where + "valid channel must be 0/1");
    s.valid.data()[i] = b;
  }
  rest = rest.subspan(n);
  if (channels.size() == 3) {
    s.albedo = Grid<float>(s.geometry.height, s.geometry.width, 0.0f);
    detail::read_f32_le(rest.first(n * 4), s.albedo->data());
  }
  s.validate();
  return s;
}

}  // namespace plumekit
