#include "plumekit/probmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <png.h>

#include "plumekit/io.hpp"

namespace plumekit {

using nlohmann::json;

ProbabilityGrid aggregate(const std::vector<Instance>& dets, const GridGeometry& geometry) {
  geometry.validate();
  Grid<double> num(geometry.height, geometry.width, 0.0), den(geometry.height, geometry.width, 0.0);
  // Pixels with a single covering detection take its soft value directly: the ratio
  // s·M / s equals M mathematically but not always in floating point.
  Grid<int> covers(geometry.height, geometry.width, 0);
  Grid<double> only(geometry.height, geometry.width, 0.0);
  for (const auto& d : dets) {
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw Error("aggregate: score outside [0,1]");
    if (d.score == 0.0 || d.mask.empty()) continue;
    const BBox& b = d.bbox();
    if (!b.inside(geometry)) throw Error("aggregate: detection outside geometry");
    for (int r = 0; r < b.rows; ++r)
      for (int c = 0; c < b.cols; ++c) {
        const double m = d.soft[static_cast<std::size_t>(r) * b.cols + c];
        num(b.row0 + r, b.col0 + c) += d.score * m;
        den(b.row0 + r, b.col0 + c) += d.score;
        ++covers(b.row0 + r, b.col0 + c);
        only(b.row0 + r, b.col0 + c) = m;
      }
  }
  ProbabilityGrid out{geometry, Grid<double>(geometry.height, geometry.width, 0.0)};
  for (std::size_t i = 0; i < num.size(); ++i)
    if (covers.data()[i] == 1)
      out.p.data()[i] = only.data()[i];
    else if (den.data()[i] > 0.0)
      out.p.data()[i] = std::clamp(num.data()[i] / den.data()[i], 0.0, 1.0);
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error("undefined correlation: need at least 2 paired values");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw Error("undefined correlation: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  return rank;
}

CorrelationReport correlation_report(const ProbabilityGrid& prob, const SceneGrid& scene) {
  if (!prob.p.same_shape(scene.xch4)) throw Error("correlation_report: probability map and scene differ in shape");
  std::vector<double> p, x;
  for (std::size_t i = 0; i < prob.p.size(); ++i)
    if (prob.p.data()[i] > 0.0 && scene.valid.data()[i]) {
      p.push_back(prob.p.data()[i]);
      x.push_back(scene.xch4.data()[i]);
    }
  CorrelationReport rep;
  rep.n = p.size();
  rep.pearson = pearson(p, x);
  rep.spearman = pearson(average_ranks(p), average_ranks(x));
  return rep;
}

void save_probmap(const ProbabilityGrid& prob, const std::filesystem::path& path) {
  const auto& g = prob.geometry;
  if (!prob.p.same_shape(g.height, g.width)) throw Error("save_probmap: grid does not match geometry");
  json header{{"magic", "PGRID"},
              {"version", 1},
              {"width", g.width},
              {"height", g.height},
              {"pixel_size_m", g.pixel_size},
              {"origin_m", {g.origin_easting, g.origin_northing}},
              {"channels", {"probability"}}};
  std::vector<char> buf;
  const std::string h = header.dump() + "\n";
  buf.insert(buf.end(), h.begin(), h.end());
  std::vector<float> vals(prob.p.data().begin(), prob.p.data().end());
  detail::write_f32_le(buf, vals);
  write_text_file(path, std::string(buf.begin(), buf.end()));
}

ProbabilityGrid load_probmap(const std::filesystem::path& path) {
  std::vector<char> payload;
  const json header = detail::read_header_and_payload(path, payload);
  const std::string where = "'" + path.string() + "': ";
  ProbabilityGrid out;
  try {
    if (header.at("magic").get<std::string>() != "PGRID") throw Error(where + "magic mismatch");
    if (header.at("version").get<int>() != 1) throw Error(where + "unsupported version");
    out.geometry.width = header.at("width").get<int>();
    out.geometry.height = header.at("height").get<int>();
    out.geometry.pixel_size = header.at("pixel_size_m").get<double>();
    if (header.contains("origin_m")) {
      out.geometry.origin_easting = header["origin_m"].at(0).get<double>();
      out.geometry.origin_northing = header["origin_m"].at(1).get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(where + "invalid header: " + e.what());
  }
  out.geometry.validate();
  const std::size_t n = static_cast<std::size_t>(out.geometry.width) * out.geometry.height;
  if (payload.size() < n * 4) throw Error(where + "truncated payload");
  if (payload.size() > n * 4) throw Error(where + "trailing bytes after payload");
  std::vector<float> vals(n);
  detail::read_f32_le(payload, vals);
  out.p = Grid<double>(out.geometry.height, out.geometry.width, std::vector<double>(vals.begin(), vals.end()));
  return out;
}

void save_probmap_png(const ProbabilityGrid& prob, const std::filesystem::path& path) {
  const int w = prob.geometry.width, h = prob.geometry.height;
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error("cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    throw Error("png: cannot initialise writer");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(w));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error("png: write failed for '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_gAMA(png, info, 1.0);
  png_write_info(png, info);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c)
      row[static_cast<std::size_t>(c)] = static_cast<png_byte>(std::lround(255.0 * std::clamp(prob.p(r, c), 0.0, 1.0)));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace plumekit
