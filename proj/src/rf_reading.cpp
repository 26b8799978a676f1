#include "pwe/rf_reading.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pwe/common.hpp"

namespace pwe::reading {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double scale_with_clamp(double v, double lo, double hi, int* clamped) {
  double t = (v - lo) / (hi - lo);
  if (t < 0.0 || t > 1.0) {
    ++*clamped;
    t = std::clamp(t, 0.0, 1.0);
  }
  return t;
}

}  // namespace

const cmap::Rgb& CompositeImage::at(int row, int col) const {
  if (row < 0 || row >= height || col < 0 || col >= width)
    throw DimensionError("composite pixel index out of range");
  return pixels[static_cast<std::size_t>(row) * width + col];
}

RFReading assemble(std::span<const route::Route> routes,
                   std::span<const route::PropagationResult> propagation) {
  if (routes.size() != propagation.size())
    throw DimensionError("route and propagation lists differ in length");
  RFReading r;
  r.records.reserve(routes.size());
  for (std::size_t i = 0; i < routes.size(); ++i) {
    if (routes[i].antenna_index != static_cast<int>(i)) {
      std::ostringstream os;
      os << "routes must be ordered by antenna index: slot " << i << " holds antenna "
         << routes[i].antenna_index;
      throw Error(os.str());
    }
    AntennaRecord rec;
    rec.azimuth_deg = routes[i].achieved.az_deg;
    rec.elevation_deg = routes[i].achieved.el_deg;
    rec.path_loss_db = propagation[i].path_loss_db;
    rec.phase_rad = propagation[i].phase_rad;
    r.records.push_back(rec);
  }
  return r;
}

NormalizedReading renormalize(const RFReading& reading,
                              std::span<const codec::AntennaDensities> densities) {
  if (reading.records.size() != densities.size())
    throw DimensionError("one density pair per antenna is required");
  NormalizedReading out;
  out.object_id = reading.object_id;
  out.pose_id = reading.pose_id;
  out.records.reserve(reading.records.size());
  for (std::size_t i = 0; i < reading.records.size(); ++i) {
    const AntennaRecord& rec = reading.records[i];
    NormalizedRecord n;
    n.azimuth01 = densities[i].azimuth.encode(rec.azimuth_deg);
    n.elevation01 = densities[i].elevation.encode(rec.elevation_deg);
    n.path_loss_db = rec.path_loss_db;
    n.phase_rad = rec.phase_rad;
    out.records.push_back(n);
  }
  return out;
}

CompositeImage colormap_encode(const NormalizedReading& reading, const CompositeSettings& s) {
  if (reading.records.empty()) throw Error("reading has no antenna records");
  if (s.band_height < 1) throw ConfigError("band height must be at least 1");
  if (!(s.loss_max_db > s.loss_min_db))
    throw ConfigError("path-loss bounds must satisfy min < max");

  const int m = static_cast<int>(reading.records.size());
  CompositeImage img;
  img.width = m;
  img.band_height = s.band_height;
  img.height = 4 * s.band_height;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);

  std::array<std::vector<cmap::Rgb>, 4> luts;
  for (int b = 0; b < 4; ++b) luts[static_cast<std::size_t>(b)] = cmap::make_lut(kBandMaps[static_cast<std::size_t>(b)], s.levels);

  for (int col = 0; col < m; ++col) {
    const NormalizedRecord& rec = reading.records[static_cast<std::size_t>(col)];
    std::array<double, 4> vals;
    vals[0] = scale_with_clamp(rec.azimuth01, 0.0, 1.0, &img.clamped_components);
    vals[1] = scale_with_clamp(rec.elevation01, 0.0, 1.0, &img.clamped_components);
    vals[2] = scale_with_clamp(rec.path_loss_db, s.loss_min_db, s.loss_max_db,
                               &img.clamped_components);
    vals[3] = scale_with_clamp(rec.phase_rad, 0.0, kTwoPi, &img.clamped_components);
    for (int b = 0; b < 4; ++b) {
      const int idx = static_cast<int>(std::lround(vals[static_cast<std::size_t>(b)] * (s.levels - 1)));
      const cmap::Rgb& c = luts[static_cast<std::size_t>(b)][static_cast<std::size_t>(idx)];
      for (int row = b * s.band_height; row < (b + 1) * s.band_height; ++row)
        img.pixels[static_cast<std::size_t>(row) * img.width + col] = c;
    }
  }
  return img;
}

DecodedComposite colormap_decode(const CompositeImage& image, const CompositeSettings& s) {
  if (image.band_height < 1 || image.height != 4 * image.band_height)
    throw DimensionError("composite image must hold four equal-height bands");

  std::array<std::vector<cmap::Rgb>, 4> luts;
  for (int b = 0; b < 4; ++b) luts[static_cast<std::size_t>(b)] = cmap::make_lut(kBandMaps[static_cast<std::size_t>(b)], s.levels);

  DecodedComposite out;
  std::array<std::vector<double>*, 4> fields = {&out.azimuth01, &out.elevation01, &out.loss01,
                                                &out.phase01};
  for (int b = 0; b < 4; ++b) {
    const int row = b * image.band_height;  // all rows in a band are identical
    for (int col = 0; col < image.width; ++col) {
      const int idx = cmap::nearest_index(luts[static_cast<std::size_t>(b)], image.at(row, col));
      fields[static_cast<std::size_t>(b)]->push_back(static_cast<double>(idx) / (s.levels - 1));
    }
  }
  return out;
}

void save_ppm(const CompositeImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  for (const auto& px : image.pixels) {
    for (int c = 0; c < 3; ++c) {
      const int v = static_cast<int>(std::lround(std::clamp(px[static_cast<std::size_t>(c)], 0.0, 1.0) * 255.0));
      out.put(static_cast<char>(v));
    }
  }
  if (!out) throw Error("failed writing: " + path);
}

}  // namespace pwe::reading
