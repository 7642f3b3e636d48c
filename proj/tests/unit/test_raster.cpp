#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "plumekit/components.hpp"
#include "plumekit/raster.hpp"
#include "support/tempdir.hpp"

using namespace plumekit;

TEST_CASE("normalize maps {0,2} to {-1,1}") {
  const auto out = normalize(Grid<double>(1, 2, std::vector<double>{0.0, 2.0}), MaskGrid(1, 2, 1));
  CHECK(out(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize of a constant field is zero") {
  const auto out = normalize(Grid<double>(1, 3, 5.0), MaskGrid(1, 3, 1));
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("normalize with one valid pixel gives 0 and the sentinel") {
  const auto out = normalize(Grid<double>(1, 2, std::vector<double>{1.0, 3.0}),
                             MaskGrid(1, 2, std::vector<std::uint8_t>{1, 0}));
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == kInvalidSentinel);
}

TEST_CASE("normalize rejects an all-invalid patch") {
  CHECK_THROWS_WITH(normalize(Grid<double>(2, 2, 1.0), MaskGrid(2, 2, 0)), "empty patch");
}

TEST_CASE("extract_patch bounds and sentinel") {
  auto scene = SceneGrid::filled(GridGeometry{10, 10}, 1900.0f);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) scene.xch4(r, c) = static_cast<float>(1900 + r + c);
  for (int r = 2; r < 4; ++r)
    for (int c = 2; c < 5; ++c) scene.valid(r, c) = 0;

  const auto full = extract_patch(scene, {0, 0}, 10);
  CHECK(full.size == 10);
  CHECK(full.origin == Pixel{0, 0});
  for (int r = 2; r < 4; ++r)
    for (int c = 2; c < 5; ++c) CHECK(full.values(r, c) == kInvalidSentinel);
  CHECK(full.values(0, 0) != kInvalidSentinel);

  CHECK_THROWS_AS(extract_patch(scene, {5, 5}, 10), Error);
}

TEST_CASE("crop_window reads only inside the scene") {
  int reads = 0;
  bool outside = false;
  crop_window(20, 30, {4, 7}, 12, [&](int sr, int sc, int pr, int pc) {
    ++reads;
    outside = outside || sr < 0 || sc < 0 || sr >= 20 || sc >= 30 || sr != pr + 4 || sc != pc + 7;
  });
  CHECK(reads == 144);
  CHECK_FALSE(outside);
  CHECK_THROWS_AS(crop_window(20, 30, {10, 0}, 12, [](int, int, int, int) {}), Error);
}

TEST_CASE("RLE conventions") {
  CHECK(rle_encode(MaskGrid(2, 2, 0)) == std::vector<std::uint32_t>{4});
  CHECK(rle_encode(MaskGrid(2, 2, 1)) == std::vector<std::uint32_t>{0, 4});
  MaskGrid m(2, 3, std::vector<std::uint8_t>{0, 1, 1, 0, 0, 1});
  const auto runs = rle_encode(m);
  CHECK(runs == std::vector<std::uint32_t>{1, 2, 2, 1});
  CHECK(rle_decode(runs, 2, 3) == m);
  CHECK_THROWS_WITH(rle_decode(std::vector<std::uint32_t>{1, 2}, 2, 3), "corrupt RLE");
}

TEST_CASE("BinaryMask keeps a tight box and JSON roundtrips") {
  const std::vector<Pixel> px{{5, 6}, {5, 7}, {7, 6}};
  const auto m = BinaryMask::from_pixels(px);
  CHECK(m.bbox() == BBox{5, 6, 3, 2});
  CHECK(m.area() == 3);
  CHECK(m.contains(7, 6));
  CHECK_FALSE(m.contains(6, 6));
  CHECK(mask_from_json(mask_to_json(m)) == m);
  CHECK(m.translated(1, -2).bbox() == BBox{6, 4, 3, 2});
}

TEST_CASE("SGRID roundtrip and corruption errors") {
  testing::TempDir dir;
  auto scene = SceneGrid::filled(GridGeometry{3, 2, 45.0}, 1900.5f);
  scene.xch4(1, 2) = 2100.25f;
  scene.valid(0, 1) = 0;
  scene.albedo = Grid<float>(2, 3, 0.3f);
  const auto path = dir.path() / "s.sgrid";
  save_scene(scene, path);
  const auto back = load_scene(path);
  CHECK(back.geometry == scene.geometry);
  CHECK(back.xch4 == scene.xch4);
  CHECK(back.valid == scene.valid);
  REQUIRE(back.albedo.has_value());
  CHECK(*back.albedo == *scene.albedo);

  // Truncate the payload by one byte.
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 1);
  CHECK_THROWS_WITH_AS(load_scene(path), doctest::Contains("truncated payload"), Error);

  // Header claims 3x2 but only 5 values follow.
  const auto bad = dir.path() / "bad.sgrid";
  {
    std::ofstream out(bad, std::ios::binary);
    out << R"({"magic":"SGRID","version":1,"width":3,"height":2,"pixel_size_m":45.0,"channels":["xch4","valid"]})"
        << '\n';
    std::vector<char> payload(5 * 4 + 6, 0);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  CHECK_THROWS_AS(load_scene(bad), Error);

  const auto magic = dir.path() / "magic.sgrid";
  {
    std::ofstream out(magic, std::ios::binary);
    out << R"({"magic":"NOPE","version":1,"width":1,"height":1,"pixel_size_m":45.0,"channels":["xch4","valid"]})"
        << '\n';
  }
  CHECK_THROWS_WITH_AS(load_scene(magic), doctest::Contains("magic mismatch"), Error);
  CHECK_THROWS_WITH_AS(load_scene(dir.path() / "missing.sgrid"), doctest::Contains("missing.sgrid"), Error);
}

TEST_CASE("connected components: 8- vs 4-connectivity") {
  MaskGrid m(3, 3, std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(label_components(m, Connectivity::eight).count == 1);
  CHECK(label_components(m, Connectivity::four).count == 3);
  CHECK(component_containing(m, {1, 1}).size() == 3);
  CHECK(component_containing(m, {0, 1}).empty());
}
