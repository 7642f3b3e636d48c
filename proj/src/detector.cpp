#include "plumekit/detector.hpp"

#include <bit>
#include <cmath>

#include "plumekit/base64.hpp"
#include "plumekit/components.hpp"
#include "plumekit/io.hpp"

namespace plumekit {

using nlohmann::json;

namespace {

std::string soft_to_base64(const std::vector<float>& soft) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(soft.size() * 4);
  for (float v : soft) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  return base64_encode(bytes);
}

std::vector<float> soft_from_base64(std::string_view text, std::size_t expected) {
  const auto bytes = base64_decode(text);
  if (bytes.size() != expected * 4) throw Error("detections: soft payload size does not match bbox");
  std::vector<float> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[i * 4 + k]) << (8 * k);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

BBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error("detections: bbox must be [row0,col0,rows,cols]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace

void Instance::validate(const GridGeometry& geometry) const {
  if (!(score >= 0.0 && score <= 1.0)) throw Error("detection " + std::to_string(id) + ": score outside [0,1]");
  if (mask.empty()) throw Error("detection " + std::to_string(id) + ": empty mask");
  if (!mask.bbox().inside(geometry)) throw Error("detection " + std::to_string(id) + ": bbox out of bounds");
  if (soft.size() != mask.bits().size()) throw Error("detection " + std::to_string(id) + ": soft size mismatch");
  for (std::size_t i = 0; i < soft.size(); ++i) {
    if (!(soft[i] >= 0.0f && soft[i] <= 1.0f)) throw Error("detection " + std::to_string(id) + ": soft value outside [0,1]");
    if ((soft[i] >= kSoftMaskThreshold) != (mask.bits()[i] != 0))
      throw Error("detection " + std::to_string(id) + ": soft values disagree with mask");
  }
}

Instance make_instance(const BBox& box, const Grid<double>& soft, double score) {
  if (!soft.same_shape(box.rows, box.cols)) throw Error("make_instance: soft map does not match bbox");
  std::vector<std::uint8_t> bits(soft.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = soft.data()[i] >= kSoftMaskThreshold ? 1 : 0;
  Instance inst;
  inst.score = score;
  inst.mask = BinaryMask::from_bits(box, bits);
  const BBox& t = inst.mask.bbox();
  inst.soft.reserve(inst.mask.bits().size());
  for (int r = t.row0; r < t.row_end(); ++r)
    for (int c = t.col0; c < t.col_end(); ++c)
      inst.soft.push_back(static_cast<float>(soft(r - box.row0, c - box.col0)));
  return inst;
}

Instance make_instance(const BinaryMask& mask, double score) {
  Instance inst;
  inst.score = score;
  inst.mask = mask;
  inst.soft.reserve(mask.bits().size());
  for (auto b : mask.bits()) inst.soft.push_back(b ? 1.0f : 0.0f);
  return inst;
}

void DetectionSet::validate() const {
  geometry.validate();
  for (const auto& d : instances) d.validate(geometry);
}

std::vector<PatchDetection> oracle_detect(const Patch& patch, double k) {
  const auto& v = patch.values;
  MaskGrid fg(v.rows(), v.cols(), 0);
  for (int r = 0; r < v.rows(); ++r)
    for (int c = 0; c < v.cols(); ++c) fg(r, c) = (patch.valid(r, c) && v(r, c) > k) ? 1 : 0;
  const auto comps = label_components(fg, Connectivity::eight);

  std::vector<PatchDetection> out;
  for (const auto& members : comps.members) {
    if (static_cast<int>(members.size()) < kOracleMinArea) continue;
    BBox box{members[0].row, members[0].col, 1, 1};
    double excess = 0.0;
    for (const auto& p : members) {
      box = bbox_union(box, {p.row, p.col, 1, 1});
      excess += v(p.row, p.col) - k;
    }
    PatchDetection d;
    d.bbox = box;
    d.soft = Grid<double>(box.rows, box.cols, 0.0);
    for (const auto& p : members)
      d.soft(p.row - box.row0, p.col - box.col0) = std::min(1.0, 0.5 + (v(p.row, p.col) - k) / 4.0);
    const double mean_excess = excess / static_cast<double>(members.size());
    d.score = 1.0 / (1.0 + std::exp(-mean_excess / 2.0));
    out.push_back(std::move(d));
  }
  return out;
}

json geometry_to_json(const GridGeometry& g) {
  return json{{"width", g.width},
              {"height", g.height},
              {"pixel_size_m", g.pixel_size},
              {"origin_m", {g.origin_easting, g.origin_northing}}};
}

GridGeometry geometry_from_json(const json& j) {
  try {
    GridGeometry g;
    g.width = j.at("width").get<int>();
    g.height = j.at("height").get<int>();
    g.pixel_size = j.value("pixel_size_m", kMethaneSatPixelM);
    if (j.contains("origin_m")) {
      g.origin_easting = j["origin_m"].at(0).get<double>();
      g.origin_northing = j["origin_m"].at(1).get<double>();
    }
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw Error(std::string("geometry json: ") + e.what());
  }
}

json detections_to_json(const DetectionSet& set) {
  json dets = json::array();
  for (const auto& d : set.instances) {
    const BBox& b = d.bbox();
    json prov{{"window", {d.provenance.window_origin.row, d.provenance.window_origin.col, d.provenance.window_size}},
              {"members", d.provenance.members}};
    dets.push_back({{"id", d.id},
                    {"score", d.score},
                    {"bbox", {b.row0, b.col0, b.rows, b.cols}},
                    {"mask", mask_to_json(d.mask)},
                    {"soft", soft_to_base64(d.soft)},
                    {"provenance", prov}});
  }
  return json{{"geometry", geometry_to_json(set.geometry)}, {"detections", dets}};
}

DetectionSet detections_from_json(const json& j, const GridGeometry& geometry) {
  DetectionSet set;
  set.geometry = geometry;
  try {
    if (!j.is_object() || !j.contains("detections") || !j["detections"].is_array())
      throw Error("detections: expected an object with a 'detections' list");
    if (j.contains("geometry")) {
      const auto g = geometry_from_json(j["geometry"]);
      if (g.width != geometry.width || g.height != geometry.height)
        throw Error("detections: file geometry does not match the scene");
    }
    int next_id = 0;
    for (const auto& e : j["detections"]) {
      if (!e.is_object()) throw Error("detections: entry must be an object");
      const double score = e.at("score").get<double>();
      if (!(score >= 0.0 && score <= 1.0)) throw Error("detections: score outside [0,1]");
      const BBox box = bbox_from_json(e.at("bbox"));
      if (!box.inside(geometry)) throw Error("detections: bbox out of bounds");
      const auto& jm = e.at("mask");
      if (jm.contains("bbox") && bbox_from_json(jm["bbox"]) != box)
        throw Error("detections: mask bbox differs from detection bbox");
      const auto runs = jm.at("rle").get<std::vector<std::uint32_t>>();
      const MaskGrid hard = rle_decode(runs, box.rows, box.cols);
      Grid<double> soft(box.rows, box.cols, 0.0);
      if (e.contains("soft") && !e["soft"].is_null()) {
        const auto vals = soft_from_base64(e["soft"].get<std::string>(), hard.size());
        for (std::size_t i = 0; i < vals.size(); ++i) soft.data()[i] = vals[i];
      } else {
        for (std::size_t i = 0; i < hard.size(); ++i) soft.data()[i] = hard.data()[i] ? 1.0 : 0.0;
      }
      for (std::size_t i = 0; i < hard.size(); ++i)
        if ((soft.data()[i] >= kSoftMaskThreshold) != (hard.data()[i] != 0))
          throw Error("detections: soft values disagree with mask");
      Instance inst = make_instance(box, soft, score);
      inst.id = e.value("id", next_id);
      if (e.contains("provenance")) {
        const auto& p = e["provenance"];
        if (p.contains("window")) {
          const auto& w = p["window"];
          inst.provenance.window_origin = {w.at(0).get<int>(), w.at(1).get<int>()};
          inst.provenance.window_size = w.at(2).get<int>();
        }
        inst.provenance.members = p.value("members", std::vector<int>{});
      }
      inst.validate(geometry);
      next_id = inst.id + 1;
      set.instances.push_back(std::move(inst));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("detections: schema violation: ") + e.what());
  }
  return set;
}

void save_detections(const DetectionSet& set, const std::filesystem::path& path) {
  write_json_file(path, detections_to_json(set));
}

DetectionSet import_detections(const std::filesystem::path& path, const GridGeometry& geometry) {
  try {
    return detections_from_json(read_json_file(path), geometry);
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.find(path.string()) != std::string::npos) throw;
    throw Error("'" + path.string() + "': " + msg);
  }
}

DetectionSet load_detections(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (!j.is_object() || !j.contains("geometry")) throw Error("'" + path.string() + "': detection file lacks geometry");
  return import_detections(path, geometry_from_json(j["geometry"]));
}

}  // namespace plumekit
