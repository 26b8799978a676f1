#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "pwe/angle_codec.hpp"
#include "pwe/colormap.hpp"
#include "pwe/router.hpp"

namespace pwe::reading {

struct AntennaRecord {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double path_loss_db = 0.0;
  double phase_rad = 0.0;  // [0, 2*pi)
};

struct RFReading {
  std::vector<AntennaRecord> records;  // index = antenna index
  int object_id = -1;
  int pose_id = -1;
  std::string run_id;
  std::vector<int> failed_antennas;  // best-effort records, flagged
};

// Per-antenna values with angles pushed back through the codec CDFs.
struct NormalizedRecord {
  double azimuth01 = 0.0;
  double elevation01 = 0.0;
  double path_loss_db = 0.0;
  double phase_rad = 0.0;
};

struct NormalizedReading {
  std::vector<NormalizedRecord> records;
  int object_id = -1;
  int pose_id = -1;
};

// Four vertically stacked bands (azimuth, elevation, path loss, phase, top to
// bottom), one column per antenna, band_height identical rows per band.
// Pixels stay floating point; the P6 file is a display artifact only.
struct CompositeImage {
  int width = 0;        // = antenna count
  int height = 0;       // = 4 * band_height
  int band_height = 0;
  std::vector<cmap::Rgb> pixels;  // row-major
  int clamped_components = 0;     // values pushed back into their bounds

  const cmap::Rgb& at(int row, int col) const;
};

inline constexpr std::array<cmap::Map, 4> kBandMaps = {cmap::Map::jet, cmap::Map::parula,
                                                       cmap::Map::turbo, cmap::Map::cool};

// routes[i].antenna_index must equal i; propagation is index-aligned.
RFReading assemble(std::span<const route::Route> routes,
                   std::span<const route::PropagationResult> propagation);

NormalizedReading renormalize(const RFReading& reading,
                              std::span<const codec::AntennaDensities> densities);

struct CompositeSettings {
  int levels = 3000;
  int band_height = 8;
  double loss_min_db = 40.0;
  double loss_max_db = 120.0;
};

CompositeImage colormap_encode(const NormalizedReading& reading, const CompositeSettings& s);

// Inverse of colormap_encode up to LUT quantization: per band, nearest LUT
// entry index / (levels-1). Order matches NormalizedRecord fields with loss
// and phase still normalized to [0, 1].
struct DecodedComposite {
  std::vector<double> azimuth01;
  std::vector<double> elevation01;
  std::vector<double> loss01;
  std::vector<double> phase01;
};

DecodedComposite colormap_decode(const CompositeImage& image, const CompositeSettings& s);

// 8-bit binary portable pixmap; round(c*255) per channel.
void save_ppm(const CompositeImage& image, const std::string& path);

}  // namespace pwe::reading
