#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pwe/angle_codec.hpp"
#include "pwe/common.hpp"
#include "pwe/environment.hpp"
#include "pwe/rf_reading.hpp"

namespace pwe::pipeline {

// Raised when a stage is invoked before its predecessors have produced their
// artifacts; the CLI maps this to exit code 2.
struct MissingArtifactError : Error {
  using Error::Error;
};

struct DensitySpec {
  std::string kind = "uniform";  // uniform | triangular | piecewise
  double lo_deg = 0.0;
  double hi_deg = 0.0;
  std::optional<double> mode_deg;                 // triangular
  std::vector<std::pair<double, double>> knots;   // piecewise (angle, density)
};

struct DensityOverride {
  int antenna = 0;
  std::string axis;  // azimuth | elevation
  DensitySpec spec;
};

// Effective run settings; every field has a default reproducing the bundled
// reference scene, so a config file only states deviations.
struct RunConfig {
  std::uint64_t seed = 42;

  // corpus
  std::string corpus_source = "synth";  // synth | directory
  std::string corpus_directory;
  std::vector<std::string> shapes;  // empty = bundled 12-shape set
  int rotations = 4;
  int morph_steps = 0;
  int image_width = 64;
  int image_height = 64;

  // scene
  geom::Vec3 room_dims{5.0, 8.0, 3.0};
  std::vector<env::Surface> coated{env::Surface::wall_xlo, env::Surface::wall_xhi,
                                   env::Surface::wall_ylo, env::Surface::wall_yhi,
                                   env::Surface::ceiling};
  double tile_side = 0.1;
  std::vector<env::Transmitter> transmitters;  // empty = four-corner default
  env::ReceiverArraySpec receiver;
  std::vector<geom::Aabb> occluders;
  env::ScatterSpec scatter;  // default: specular off the room-center object
  bool scatter_given = false;
  double theta_max_deg = 60.0;
  double grid_step_deg = 2.0;
  double reflection_loss_db = 3.0;
  int route_transmitter = 0;

  // densities
  DensitySpec azimuth_density{"uniform", 76.0, 104.0, std::nullopt, {}};
  DensitySpec elevation_density{"uniform", -8.0, 8.0, std::nullopt, {}};
  std::vector<DensityOverride> density_overrides;

  // encoder
  int outer_iterations = 8;
  std::string gradient = "analytic";  // analytic | fd
  double bound_epsilon = 1e-6;

  reading::CompositeSettings composite;

  // reconstruction channel
  std::string channel_kind = "identity";  // identity | distortion | nearest_reading
  double noise_sigma = 0.0;
  int blur_radius = 0;
  int shift_px = 0;
  bool holdout_query_readings = false;

  std::vector<std::string> metrics{"ssim", "l2", "psnr", "mi", "cosine"};
  std::vector<int> query_poses;  // empty = every pose queries

  int antenna_count() const { return receiver.rows * receiver.cols; }
  int slot_count() const { return 2 * antenna_count(); }
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
// Canonical full-field serialization; the digest hashes this form, so two
// configs agree iff their effective settings agree.
nlohmann::json config_to_json(const RunConfig& cfg);
std::string config_digest(const RunConfig& cfg);

std::vector<std::string> default_shapes();
env::Environment make_scene(const RunConfig& cfg);
std::vector<codec::AntennaDensities> make_densities(const RunConfig& cfg);

struct StageResult {
  std::vector<std::string> warnings;
  std::vector<std::string> artifacts;  // paths relative to the run directory
};

StageResult stage_synth(const RunConfig& cfg, const std::filesystem::path& out);
StageResult stage_encode(const RunConfig& cfg, const std::filesystem::path& out);
StageResult stage_route(const RunConfig& cfg, const std::filesystem::path& out);
StageResult stage_read(const RunConfig& cfg, const std::filesystem::path& out);
StageResult stage_evaluate(const RunConfig& cfg, const std::filesystem::path& out);
StageResult stage_report(const RunConfig& cfg, const std::filesystem::path& out);

// Runs one named stage and records it in the manifest. Stage names: synth,
// encode, route, read, evaluate, report.
void run_stage(const RunConfig& cfg, const std::filesystem::path& out,
               const std::string& stage);
// synth through report, in order.
void run_all(const RunConfig& cfg, const std::filesystem::path& out);

// tmp-file-plus-rename; 2-space indent, sorted keys (nlohmann object order).
void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path);
// Throws MissingArtifactError naming the producing stage when absent.
nlohmann::json load_json_artifact(const std::filesystem::path& path,
                                  const std::string& producing_stage);

}  // namespace pwe::pipeline
