#pragma once

#include <array>
#include <string>
#include <vector>

namespace pwe::cmap {

using Rgb = std::array<double, 3>;  // components in [0, 1]

enum class Map { jet, parula, turbo, cool };

Map map_from_name(const std::string& name);
const char* name_of(Map m);

// Continuous definition sampled at t in [0, 1].
Rgb sample(Map m, double t);

// levels >= 2 entries, entry k = sample(m, k/(levels-1)).
std::vector<Rgb> make_lut(Map m, int levels);

// Nearest entry by squared Euclidean distance; ties go to the lower index.
int nearest_index(const std::vector<Rgb>& lut, const Rgb& color);

}  // namespace pwe::cmap
