#include <doctest.h>

#include <cmath>
#include <limits>

#include "pwe/colormap.hpp"
#include "pwe/common.hpp"

using namespace pwe;
using namespace pwe::cmap;

TEST_CASE("map names round-trip and unknown names are rejected") {
  for (Map m : {Map::jet, Map::parula, Map::turbo, Map::cool}) {
    CHECK(map_from_name(name_of(m)) == m);
  }
  CHECK_THROWS_AS(map_from_name("viridis"), ConfigError);
}

TEST_CASE("jet endpoints and midpoint") {
  CHECK(sample(Map::jet, 0.0) == Rgb{0.0, 0.0, 0.5});
  CHECK(sample(Map::jet, 1.0) == Rgb{0.5, 0.0, 0.0});
  CHECK(sample(Map::jet, 0.5) == Rgb{0.5, 1.0, 0.5});
}

TEST_CASE("cool is the linear cyan-to-magenta ramp") {
  CHECK(sample(Map::cool, 0.0) == Rgb{0.0, 1.0, 1.0});
  CHECK(sample(Map::cool, 1.0) == Rgb{1.0, 0.0, 1.0});
  const Rgb mid = sample(Map::cool, 0.3);
  CHECK(mid[0] == doctest::Approx(0.3));
  CHECK(mid[1] == doctest::Approx(0.7));
  CHECK(mid[2] == 1.0);
}

TEST_CASE("parula endpoints match its anchor table") {
  const Rgb lo = sample(Map::parula, 0.0);
  CHECK(lo[0] == doctest::Approx(0.2081));
  CHECK(lo[1] == doctest::Approx(0.1663));
  CHECK(lo[2] == doctest::Approx(0.5292));
  const Rgb hi = sample(Map::parula, 1.0);
  CHECK(hi[0] == doctest::Approx(0.9763));
  CHECK(hi[1] == doctest::Approx(0.9831));
  CHECK(hi[2] == doctest::Approx(0.0538));
}

TEST_CASE("turbo stays inside the unit cube and starts near dark blue-red") {
  const Rgb lo = sample(Map::turbo, 0.0);
  CHECK(lo[0] == doctest::Approx(0.13572138));
  CHECK(lo[1] == doctest::Approx(0.09140261));
  CHECK(lo[2] == doctest::Approx(0.10667330));
  for (int i = 0; i <= 200; ++i) {
    const Rgb c = sample(Map::turbo, i / 200.0);
    for (double v : c) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("sample rejects parameters outside the unit interval") {
  CHECK_THROWS_AS(sample(Map::jet, -0.01), Error);
  CHECK_THROWS_AS(sample(Map::jet, 1.01), Error);
  CHECK_THROWS_AS(sample(Map::cool, std::numeric_limits<double>::quiet_NaN()), Error);
}

TEST_CASE("make_lut samples the map at evenly spaced parameters") {
  for (Map m : {Map::jet, Map::parula, Map::turbo, Map::cool}) {
    const auto lut = make_lut(m, 5);
    REQUIRE(lut.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(lut[static_cast<std::size_t>(k)] == sample(m, k / 4.0));

    const auto two = make_lut(m, 2);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == sample(m, 0.0));
    CHECK(two[1] == sample(m, 1.0));
  }
  CHECK_THROWS_AS(make_lut(Map::jet, 1), ConfigError);
  CHECK_THROWS_AS(make_lut(Map::jet, 0), ConfigError);
}

TEST_CASE("every 128-level LUT entry is distinct across all maps") {
  for (Map m : {Map::jet, Map::parula, Map::turbo, Map::cool}) {
    const auto lut = make_lut(m, 128);
    for (std::size_t i = 0; i < lut.size(); ++i) {
      for (std::size_t j = i + 1; j < lut.size(); ++j) {
        CHECK(lut[i] != lut[j]);
      }
    }
  }
}

TEST_CASE("nearest_index recovers exact LUT colors") {
  for (Map m : {Map::jet, Map::parula, Map::turbo, Map::cool}) {
    const auto lut = make_lut(m, 64);
    for (std::size_t k = 0; k < lut.size(); ++k) {
      CHECK(nearest_index(lut, lut[k]) == static_cast<int>(k));
    }
  }
}

TEST_CASE("nearest_index breaks ties toward the lower index") {
  const std::vector<Rgb> lut{{0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}};
  CHECK(nearest_index(lut, {0.0, 0.0, 0.5}) == 0);
  CHECK(nearest_index(lut, {0.0, 0.0, 0.51}) == 1);
  CHECK_THROWS_AS(nearest_index({}, {0.0, 0.0, 0.0}), Error);
}
