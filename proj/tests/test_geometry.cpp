#include <doctest.h>

#include <cmath>
#include <random>

#include "pwe/common.hpp"
#include "pwe/geometry.hpp"

using namespace pwe;
using namespace pwe::geom;

TEST_CASE("vector algebra basics") {
  const Vec3 a{1, 2, 3}, b{4, -5, 6};
  CHECK(dot(a, b) == doctest::Approx(1 * 4 + 2 * -5 + 3 * 6));
  const Vec3 c = cross(a, b);
  CHECK(dot(c, a) == doctest::Approx(0.0));
  CHECK(dot(c, b) == doctest::Approx(0.0));
  CHECK(norm(Vec3{3, 4, 0}) == doctest::Approx(5.0));
  CHECK(norm(normalized(b)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("azimuth/elevation conversions on axis directions") {
  const AzEl px = direction_to_azel({1, 0, 0});
  CHECK(px.az_deg == doctest::Approx(0.0));
  CHECK(px.el_deg == doctest::Approx(0.0));
  const AzEl py = direction_to_azel({0, 1, 0});
  CHECK(py.az_deg == doctest::Approx(90.0));
  const AzEl pz = direction_to_azel({0, 0, 1});
  CHECK(pz.el_deg == doctest::Approx(90.0));
  const AzEl nx = direction_to_azel({-1, 0, 0});
  CHECK(std::abs(nx.az_deg) == doctest::Approx(180.0));
}

TEST_CASE("azel/direction roundtrip over a random sweep") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const AzEl a{uniform01(rng) * 360.0 - 180.0, uniform01(rng) * 178.0 - 89.0};
    const AzEl back = direction_to_azel(azel_to_direction(a));
    CHECK(angular_distance_deg(a, back) < 1e-9);
  }
}

TEST_CASE("angular distance of orthogonal and identical directions") {
  CHECK(angular_distance_deg(Vec3{1, 0, 0}, Vec3{0, 1, 0}) == doctest::Approx(90.0));
  CHECK(angular_distance_deg(Vec3{1, 0, 0}, Vec3{1, 0, 0}) == doctest::Approx(0.0));
  CHECK(angular_distance_deg(Vec3{1, 0, 0}, Vec3{-1, 0, 0}) == doctest::Approx(180.0));
  CHECK(angular_distance_deg(AzEl{0, 0}, AzEl{0, 90}) == doctest::Approx(90.0));
}

TEST_CASE("quantize_deg rounds to the nearest grid multiple") {
  CHECK(quantize_deg(0.9, 2.0) == doctest::Approx(0.0));
  CHECK(quantize_deg(1.1, 2.0) == doctest::Approx(2.0));
  CHECK(quantize_deg(-3.2, 2.0) == doctest::Approx(-4.0));
  CHECK(quantize_deg(59.9, 2.0) == doctest::Approx(60.0));
}

namespace {

// Dense sampling stand-in for the exact segment/box predicate: walk the open
// segment and test each sample against the open box interior.
bool segment_hits_box_sampled(const Vec3& p, const Vec3& q, const Aabb& box) {
  const int samples = 1000;
  for (int i = 1; i < samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    if (box.contains_open(p + (q - p) * t)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("segment through a box centered on it is blocked") {
  const Aabb box{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}};
  CHECK(segment_hits_box_interior({-2, 0, 0}, {2, 0, 0}, box));
  CHECK_FALSE(segment_hits_box_interior({-2, 2, 0}, {2, 2, 0}, box));
}

TEST_CASE("segment grazing a face does not count as interior") {
  const Aabb box{{0, 0, 0}, {1, 1, 1}};
  CHECK_FALSE(segment_hits_box_interior({-1, 0, 0.5}, {2, 0, 0.5}, box));
  CHECK_FALSE(segment_hits_box_interior({-1, 1, 0.5}, {2, 1, 0.5}, box));
}

TEST_CASE("segment ending exactly on the box surface does not count") {
  const Aabb box{{0, 0, 0}, {1, 1, 1}};
  CHECK_FALSE(segment_hits_box_interior({-1, 0.5, 0.5}, {0, 0.5, 0.5}, box));
}

TEST_CASE("segment/box predicate agrees with dense sampling on random pairs") {
  std::mt19937_64 rng(99);
  int both_hit = 0;
  for (int i = 0; i < 2000; ++i) {
    auto r = [&] { return uniform01(rng) * 4.0 - 2.0; };
    Vec3 lo{r(), r(), r()};
    Vec3 hi{lo.x + uniform01(rng) + 0.05, lo.y + uniform01(rng) + 0.05,
            lo.z + uniform01(rng) + 0.05};
    const Aabb box{lo, hi};
    const Vec3 p{r(), r(), r()}, q{r(), r(), r()};
    const bool exact = segment_hits_box_interior(p, q, box);
    const bool sampled = segment_hits_box_sampled(p, q, box);
    // Sampling can miss a sliver the exact test finds, but a sampled hit
    // must always be confirmed by the exact predicate.
    if (sampled) CHECK(exact);
    if (exact) {
      // confirm with a finer scan before accepting the exact positive
      bool confirmed = false;
      for (int k = 1; k < 20000 && !confirmed; ++k) {
        const double t = static_cast<double>(k) / 20000;
        confirmed = box.contains_open(p + (q - p) * t);
      }
      CHECK(confirmed);
    }
    if (exact && sampled) ++both_hit;
  }
  CHECK(both_hit > 20);  // the sweep actually exercised intersecting cases
}
