#include "pwe/colormap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pwe/common.hpp"

namespace pwe::cmap {
namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Piecewise-linear tent: the classic rainbow map.
Rgb jet(double t) {
  return {clamp01(1.5 - std::abs(4.0 * t - 3.0)), clamp01(1.5 - std::abs(4.0 * t - 2.0)),
          clamp01(1.5 - std::abs(4.0 * t - 1.0))};
}

Rgb cool(double t) { return {t, 1.0 - t, 1.0}; }

// Quintic polynomial fit of the turbo map.
Rgb turbo(double t) {
  const double x = clamp01(t);
  const double x2 = x * x, x3 = x2 * x, x4 = x3 * x, x5 = x4 * x;
  const double r = 0.13572138 + 4.61539260 * x - 42.66032258 * x2 + 132.13108234 * x3 -
                   152.94239396 * x4 + 59.28637943 * x5;
  const double g = 0.09140261 + 2.19418839 * x + 4.84296658 * x2 - 14.18503333 * x3 +
                   4.27729857 * x4 + 2.82956604 * x5;
  const double b = 0.10667330 + 12.64194608 * x - 60.58204836 * x2 + 110.36276771 * x3 -
                   89.90310912 * x4 + 27.34824973 * x5;
  return {clamp01(r), clamp01(g), clamp01(b)};
}

// Blue->teal->green->yellow anchor table, linearly interpolated. Anchors are
// an approximation of the published map; the pipeline only relies on the
// curve being smooth and injective.
constexpr int kParulaAnchors = 17;
constexpr double kParula[kParulaAnchors][3] = {
    {0.2081, 0.1663, 0.5292}, {0.2116, 0.2301, 0.6521}, {0.1959, 0.2949, 0.7412},
    {0.1707, 0.3579, 0.8003}, {0.1253, 0.4253, 0.8453}, {0.0641, 0.4895, 0.8608},
    {0.0117, 0.5483, 0.8329}, {0.0327, 0.6022, 0.7924}, {0.0795, 0.6491, 0.7368},
    {0.1323, 0.6901, 0.6718}, {0.2082, 0.7269, 0.5923}, {0.3328, 0.7558, 0.4882},
    {0.4783, 0.7747, 0.3708}, {0.6476, 0.7793, 0.2448}, {0.8207, 0.7641, 0.1545},
    {0.9440, 0.8180, 0.0987}, {0.9763, 0.9831, 0.0538}};

Rgb parula(double t) {
  const double x = clamp01(t) * (kParulaAnchors - 1);
  const int i = std::min(static_cast<int>(std::floor(x)), kParulaAnchors - 2);
  const double f = x - i;
  Rgb out;
  for (int c = 0; c < 3; ++c) out[c] = kParula[i][c] * (1.0 - f) + kParula[i + 1][c] * f;
  return out;
}

}  // namespace

Map map_from_name(const std::string& name) {
  if (name == "jet") return Map::jet;
  if (name == "parula") return Map::parula;
  if (name == "turbo") return Map::turbo;
  if (name == "cool") return Map::cool;
  throw ConfigError("unknown colormap: " + name);
}

const char* name_of(Map m) {
  switch (m) {
    case Map::jet: return "jet";
    case Map::parula: return "parula";
    case Map::turbo: return "turbo";
    case Map::cool: return "cool";
  }
  return "?";
}

Rgb sample(Map m, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error("colormap parameter must lie in [0, 1]");
  switch (m) {
    case Map::jet: return jet(t);
    case Map::parula: return parula(t);
    case Map::turbo: return turbo(t);
    case Map::cool: return cool(t);
  }
  throw Error("unknown colormap");
}

std::vector<Rgb> make_lut(Map m, int levels) {
  if (levels < 2) throw ConfigError("colormap needs at least two levels");
  std::vector<Rgb> lut(static_cast<std::size_t>(levels));
  for (int k = 0; k < levels; ++k)
    lut[static_cast<std::size_t>(k)] = sample(m, static_cast<double>(k) / (levels - 1));
  return lut;
}

int nearest_index(const std::vector<Rgb>& lut, const Rgb& color) {
  if (lut.empty()) throw Error("empty colormap lookup table");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < lut.size(); ++k) {
    const double dr = lut[k][0] - color[0];
    const double dg = lut[k][1] - color[1];
    const double db = lut[k][2] - color[2];
    const double d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace pwe::cmap
