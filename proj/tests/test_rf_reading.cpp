#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "pwe/angle_codec.hpp"
#include "pwe/common.hpp"
#include "pwe/rf_reading.hpp"

using namespace pwe;
using namespace pwe::reading;
using pwe::codec::AngleAxis;
using pwe::codec::AngleRange;
using pwe::codec::AntennaDensities;
using pwe::codec::SteerabilityDensity;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

route::Route make_route(int antenna, double az, double el) {
  route::Route r;
  r.antenna_index = antenna;
  r.nodes = {0, 100 + antenna};
  r.hop_lengths = {1.0};
  r.achieved = {az, el};
  return r;
}

std::vector<AntennaDensities> uniform_densities(int m) {
  std::vector<AntennaDensities> out;
  for (int i = 0; i < m; ++i) {
    out.push_back({SteerabilityDensity::uniform({0.0, 90.0, AngleAxis::azimuth, i}),
                   SteerabilityDensity::uniform({-20.0, 20.0, AngleAxis::elevation, i})});
  }
  return out;
}

}  // namespace

TEST_CASE("assemble copies achieved directions and propagation per antenna") {
  const std::vector<route::Route> routes{make_route(0, 30.0, -5.0), make_route(1, 60.0, 10.0)};
  const std::vector<route::PropagationResult> prop{{80.0, 1.0}, {95.5, 2.5}};
  const RFReading r = assemble(routes, prop);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].azimuth_deg == 30.0);
  CHECK(r.records[0].elevation_deg == -5.0);
  CHECK(r.records[0].path_loss_db == 80.0);
  CHECK(r.records[0].phase_rad == 1.0);
  CHECK(r.records[1].azimuth_deg == 60.0);
  CHECK(r.records[1].path_loss_db == 95.5);
  CHECK(r.failed_antennas.empty());
}

TEST_CASE("assemble works for a single antenna") {
  const std::vector<route::Route> routes{make_route(0, 90.0, 0.0)};
  const std::vector<route::PropagationResult> prop{{70.0, 0.25}};
  const RFReading r = assemble(routes, prop);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].azimuth_deg == 90.0);
}

TEST_CASE("assemble rejects permuted or mismatched inputs") {
  const std::vector<route::Route> permuted{make_route(1, 30.0, 0.0), make_route(0, 60.0, 0.0)};
  const std::vector<route::PropagationResult> prop{{80.0, 1.0}, {90.0, 2.0}};
  CHECK_THROWS_WITH_AS(assemble(permuted, prop), doctest::Contains("ordered by antenna"), Error);

  const std::vector<route::Route> routes{make_route(0, 30.0, 0.0), make_route(1, 60.0, 0.0)};
  const std::vector<route::PropagationResult> short_prop{{80.0, 1.0}};
  CHECK_THROWS_AS(assemble(routes, short_prop), DimensionError);
}

TEST_CASE("renormalize maps angles through the density CDFs") {
  RFReading r;
  r.records = {{45.0, 0.0, 88.0, 3.0}, {22.5, 10.0, 92.0, 4.0}};
  const auto densities = uniform_densities(2);
  const NormalizedReading n = renormalize(r, densities);
  REQUIRE(n.records.size() == 2);
  CHECK(n.records[0].azimuth01 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(n.records[0].elevation01 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(n.records[0].path_loss_db == 88.0);
  CHECK(n.records[0].phase_rad == 3.0);
  CHECK(n.records[1].azimuth01 == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(n.records[1].elevation01 == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("renormalize inverts decode for mixed density kinds") {
  std::vector<AntennaDensities> densities;
  densities.push_back({SteerabilityDensity::triangular({60.0, 120.0, AngleAxis::azimuth, 0}, 80.0),
                       SteerabilityDensity::piecewise_linear(
                           {-15.0, 15.0, AngleAxis::elevation, 0},
                           {{-15.0, 0.2}, {0.0, 1.0}, {15.0, 0.2}})});
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double ua = uniform01(rng), ue = uniform01(rng);
    RFReading r;
    r.records = {{densities[0].azimuth.decode(ua), densities[0].elevation.decode(ue), 90.0, 1.0}};
    const NormalizedReading n = renormalize(r, densities);
    CHECK(std::abs(n.records[0].azimuth01 - ua) < 1e-9);
    CHECK(std::abs(n.records[0].elevation01 - ue) < 1e-9);
  }
}

TEST_CASE("renormalize validates arity and angle ranges") {
  RFReading r;
  r.records = {{45.0, 0.0, 88.0, 3.0}};
  CHECK_THROWS_AS(renormalize(r, uniform_densities(2)), DimensionError);
  RFReading out_of_range;
  out_of_range.records = {{100.0, 0.0, 88.0, 3.0}};  // azimuth beyond [0, 90]
  CHECK_THROWS_AS(renormalize(out_of_range, uniform_densities(1)), Error);
}

TEST_CASE("colormap_encode paints four bands with the pinned maps") {
  CompositeSettings s;
  s.levels = 3000;
  s.band_height = 3;
  NormalizedReading n;
  n.records = {{0.0, 1.0, s.loss_min_db, 0.0}, {1.0, 0.0, s.loss_max_db, kTwoPi / 2}};
  const CompositeImage img = colormap_encode(n, s);

  CHECK(img.width == 2);
  CHECK(img.height == 12);
  CHECK(img.band_height == 3);
  CHECK(img.clamped_components == 0);

  // azimuth band: jet endpoints
  CHECK(img.at(0, 0) == cmap::Rgb{0.0, 0.0, 0.5});
  CHECK(img.at(0, 1) == cmap::Rgb{0.5, 0.0, 0.0});
  // elevation band: parula endpoints
  CHECK(img.at(3, 0)[0] == doctest::Approx(0.9763));
  CHECK(img.at(3, 1)[0] == doctest::Approx(0.2081));
  // loss band: turbo endpoints
  CHECK(img.at(6, 0) == cmap::sample(cmap::Map::turbo, 0.0));
  CHECK(img.at(6, 1) == cmap::sample(cmap::Map::turbo, 1.0));
  // phase band: cool at 0 and one half turn
  CHECK(img.at(9, 0) == cmap::Rgb{0.0, 1.0, 1.0});
  const double half = std::lround(0.5 * (s.levels - 1)) / static_cast<double>(s.levels - 1);
  CHECK(img.at(9, 1) == cmap::sample(cmap::Map::cool, half));

  // every row within a band carries the same color
  for (int b = 0; b < 4; ++b) {
    for (int row = b * 3; row < (b + 1) * 3; ++row) {
      CHECK(img.at(row, 0) == img.at(b * 3, 0));
      CHECK(img.at(row, 1) == img.at(b * 3, 1));
    }
  }
  CHECK_THROWS_AS(img.at(12, 0), DimensionError);
  CHECK_THROWS_AS(img.at(0, 2), DimensionError);
  CHECK_THROWS_AS(img.at(-1, 0), DimensionError);
}

TEST_CASE("colormap_encode clamps out-of-window values and counts them") {
  CompositeSettings s;
  NormalizedReading n;
  n.records = {{1.2, 0.5, s.loss_min_db - 10.0, 7.0}};  // az high, loss low, phase > 2*pi
  const CompositeImage img = colormap_encode(n, s);
  CHECK(img.clamped_components == 3);
  CHECK(img.at(0, 0) == cmap::sample(cmap::Map::jet, 1.0));
  CHECK(img.at(2 * s.band_height, 0) == cmap::sample(cmap::Map::turbo, 0.0));
  CHECK(img.at(3 * s.band_height, 0) == cmap::sample(cmap::Map::cool, 1.0));
}

TEST_CASE("colormap_encode validates settings") {
  NormalizedReading n;
  n.records = {{0.5, 0.5, 80.0, 1.0}};
  CompositeSettings bad_band;
  bad_band.band_height = 0;
  CHECK_THROWS_AS(colormap_encode(n, bad_band), ConfigError);
  CompositeSettings bad_window;
  bad_window.loss_min_db = 120.0;
  bad_window.loss_max_db = 40.0;
  CHECK_THROWS_AS(colormap_encode(n, bad_window), ConfigError);
  NormalizedReading empty;
  CHECK_THROWS_AS(colormap_encode(empty, CompositeSettings{}), Error);
}

TEST_CASE("colormap_decode recovers every component within one LUT step") {
  CompositeSettings s;  // 3000 levels, loss window [40, 120]
  std::mt19937_64 rng(123);
  const double step = 1.0 / (s.levels - 1);

  NormalizedReading n;
  for (int i = 0; i < 500; ++i) {
    NormalizedRecord rec;
    rec.azimuth01 = uniform01(rng);
    rec.elevation01 = uniform01(rng);
    rec.path_loss_db = s.loss_min_db + uniform01(rng) * (s.loss_max_db - s.loss_min_db);
    rec.phase_rad = uniform01(rng) * kTwoPi;
    n.records.push_back(rec);
  }
  const CompositeImage img = colormap_encode(n, s);
  CHECK(img.clamped_components == 0);
  const DecodedComposite d = colormap_decode(img, s);
  REQUIRE(d.azimuth01.size() == 500);

  for (int i = 0; i < 500; ++i) {
    const auto& rec = n.records[static_cast<std::size_t>(i)];
    const std::size_t k = static_cast<std::size_t>(i);
    CHECK(std::abs(d.azimuth01[k] - rec.azimuth01) <= step + 1e-12);
    CHECK(std::abs(d.elevation01[k] - rec.elevation01) <= step + 1e-12);
    const double loss01 = (rec.path_loss_db - s.loss_min_db) / (s.loss_max_db - s.loss_min_db);
    CHECK(std::abs(d.loss01[k] - loss01) <= step + 1e-12);
    CHECK(std::abs(d.phase01[k] - rec.phase_rad / kTwoPi) <= step + 1e-12);
  }
}

TEST_CASE("colormap_decode is exact on the all-zero reading") {
  CompositeSettings s;
  NormalizedReading n;
  n.records = {{0.0, 0.0, s.loss_min_db, 0.0}, {0.0, 0.0, s.loss_min_db, 0.0}};
  const DecodedComposite d = colormap_decode(colormap_encode(n, s), s);
  for (double v : d.azimuth01) CHECK(v == 0.0);
  for (double v : d.elevation01) CHECK(v == 0.0);
  for (double v : d.loss01) CHECK(v == 0.0);
  for (double v : d.phase01) CHECK(v == 0.0);
}

TEST_CASE("decode then re-encode reproduces the image exactly") {
  CompositeSettings s;
  s.levels = 512;
  std::mt19937_64 rng(9);
  NormalizedReading n;
  for (int i = 0; i < 40; ++i) {
    n.records.push_back({uniform01(rng), uniform01(rng),
                         s.loss_min_db + uniform01(rng) * (s.loss_max_db - s.loss_min_db),
                         uniform01(rng) * kTwoPi});
  }
  const CompositeImage img = colormap_encode(n, s);
  const DecodedComposite d = colormap_decode(img, s);

  NormalizedReading snapped;
  for (std::size_t i = 0; i < d.azimuth01.size(); ++i) {
    snapped.records.push_back(
        {d.azimuth01[i], d.elevation01[i],
         s.loss_min_db + d.loss01[i] * (s.loss_max_db - s.loss_min_db), d.phase01[i] * kTwoPi});
  }
  const CompositeImage again = colormap_encode(snapped, s);
  REQUIRE(again.pixels.size() == img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(again.pixels[i] == img.pixels[i]);
}

TEST_CASE("colormap_decode validates band structure") {
  CompositeSettings s;
  CompositeImage bad;
  bad.width = 1;
  bad.height = 10;
  bad.band_height = 3;  // 4 * 3 != 10
  bad.pixels.resize(10);
  CHECK_THROWS_AS(colormap_decode(bad, s), DimensionError);
}

TEST_CASE("save_ppm writes the expected binary header and bytes") {
  CompositeSettings s;
  s.band_height = 1;
  NormalizedReading n;
  n.records = {{0.0, 0.0, s.loss_min_db, 0.0}};
  const CompositeImage img = colormap_encode(n, s);

  const auto path =
      (std::filesystem::temp_directory_path() / "pwe_test_reading.ppm").string();
  save_ppm(img, path);
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "P6");
  std::string dims;
  std::getline(in, dims);
  CHECK(dims == "1 4");
  std::string depth;
  std::getline(in, depth);
  CHECK(depth == "255");
  std::vector<unsigned char> bytes(12);
  in.read(reinterpret_cast<char*>(bytes.data()), 12);
  REQUIRE(in.gcount() == 12);
  // first pixel is jet(0) = (0, 0, 0.5) -> bytes (0, 0, 128)
  CHECK(bytes[0] == 0);
  CHECK(bytes[1] == 0);
  CHECK(bytes[2] == 128);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(save_ppm(img, "/nonexistent_dir_zz/x.ppm"), Error);
}
