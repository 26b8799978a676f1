#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pwe/common.hpp"
#include "pwe/pipeline.hpp"

using namespace pwe;
using namespace pwe::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("pwe_pipeline_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small but complete scene: three 32x32 shapes, a 2x2 receiver, one
// transmitter, coarse tiles. Runs the whole pipeline in about a second.
RunConfig tiny_config() {
  return parse_config(json::parse(R"({
    "seed": 11,
    "corpus": {"shapes": ["square", "triangle", "bar"], "rotations": 1,
               "width": 32, "height": 32},
    "scene": {
      "room": [4, 4, 3],
      "tile_side": 0.1,
      "transmitters": [{"position": [-1.5, -1.5, 1.75], "frequency_hz": 5e9}],
      "receiver": {"center": [0, -2, 1.5], "rows": 2, "cols": 3, "spacing_m": 0}
    },
    "densities": {
      "azimuth": {"kind": "uniform", "lo_deg": 70, "hi_deg": 110},
      "elevation": {"kind": "uniform", "lo_deg": -10, "hi_deg": 10}
    },
    "encoder": {"outer_iterations": 2},
    "metrics": ["l2", "cosine"]
  })"));
}

}  // namespace

TEST_CASE("parse_config fills every default from an empty object") {
  const RunConfig cfg = parse_config(json::object());
  CHECK(cfg.seed == 42);
  CHECK(cfg.corpus_source == "synth");
  CHECK(cfg.shapes == default_shapes());
  CHECK(cfg.rotations == 4);
  CHECK(cfg.morph_steps == 0);
  CHECK(cfg.image_width == 64);
  CHECK(cfg.image_height == 64);
  CHECK(cfg.room_dims == geom::Vec3{5.0, 8.0, 3.0});
  CHECK(cfg.coated.size() == 5);
  CHECK(cfg.tile_side == 0.1);
  REQUIRE(cfg.transmitters.size() == 4);
  CHECK(cfg.transmitters[0].position == geom::Vec3{-2.0, -3.5, 1.75});
  CHECK(cfg.transmitters[3].position == geom::Vec3{2.0, 3.5, 1.75});
  CHECK(cfg.transmitters[0].frequency_hz == 5e9);
  CHECK(cfg.receiver.center == geom::Vec3{0.0, -4.0, 1.5});
  CHECK(cfg.receiver.rows == 10);
  CHECK(cfg.receiver.cols == 10);
  CHECK(cfg.receiver.spacing_m == 0.0);
  CHECK(cfg.theta_max_deg == 60.0);
  CHECK(cfg.grid_step_deg == 2.0);
  CHECK(cfg.reflection_loss_db == 3.0);
  CHECK(cfg.azimuth_density.kind == "uniform");
  CHECK(cfg.azimuth_density.lo_deg == 76.0);
  CHECK(cfg.azimuth_density.hi_deg == 104.0);
  CHECK(cfg.elevation_density.lo_deg == -8.0);
  CHECK(cfg.elevation_density.hi_deg == 8.0);
  CHECK(cfg.outer_iterations == 8);
  CHECK(cfg.gradient == "analytic");
  CHECK(cfg.bound_epsilon == 1e-6);
  CHECK(cfg.composite.levels == 3000);
  CHECK(cfg.composite.band_height == 8);
  CHECK(cfg.composite.loss_min_db == 40.0);
  CHECK(cfg.composite.loss_max_db == 120.0);
  CHECK(cfg.channel_kind == "identity");
  CHECK(cfg.metrics == std::vector<std::string>{"ssim", "l2", "psnr", "mi", "cosine"});
  CHECK(cfg.query_poses.empty());
  CHECK(cfg.antenna_count() == 100);
  CHECK(cfg.slot_count() == 200);
}

TEST_CASE("parse_config applies nested overrides") {
  const RunConfig cfg = parse_config(json::parse(R"({
    "seed": 7,
    "corpus": {"shapes": ["square"], "rotations": 2, "morph_steps": 1,
               "width": 48, "height": 40},
    "scene": {
      "room": [4, 6, 2.5],
      "coated": ["ceiling", "wall_ylo"],
      "tile_side": 0.25,
      "transmitters": [{"id": 9, "position": [1, 2, 1], "frequency_hz": 2.4e9}],
      "receiver": {"center": [0.5, -2, 1], "rows": 3, "cols": 4, "spacing_m": 0.05},
      "occluders": [{"lo": [0, 0, 0], "hi": [1, 1, 1]}],
      "scatter": {"mode": "explicit", "tiles": [4, 2]},
      "theta_max_deg": 45.0,
      "grid_step_deg": 1.0,
      "reflection_loss_db": 2.5,
      "route_transmitter": 0
    },
    "densities": {
      "azimuth": {"kind": "triangular", "lo_deg": 60, "hi_deg": 120, "mode_deg": 100},
      "elevation": {"kind": "piecewise", "lo_deg": -10, "hi_deg": 10,
                    "knots": [[-10, 0.1], [0, 1.0], [10, 0.1]]},
      "overrides": [{"antenna": 2, "axis": "elevation", "kind": "uniform",
                     "lo_deg": -5, "hi_deg": 5}]
    },
    "encoder": {"outer_iterations": 3, "gradient": "fd", "bound_epsilon": 1e-5},
    "composite": {"levels": 500, "band_height": 4, "loss_min_db": 30, "loss_max_db": 90},
    "channel": {"kind": "distortion", "noise_sigma": 0.05, "blur_radius": 1, "shift_px": 2,
                "holdout_query_readings": true},
    "metrics": ["ssim", "mi"],
    "retrieval": {"query_poses": [0, 1]}
  })"));

  CHECK(cfg.seed == 7);
  CHECK(cfg.shapes == std::vector<std::string>{"square"});
  CHECK(cfg.rotations == 2);
  CHECK(cfg.morph_steps == 1);
  CHECK(cfg.image_width == 48);
  CHECK(cfg.image_height == 40);
  CHECK(cfg.room_dims == geom::Vec3{4.0, 6.0, 2.5});
  REQUIRE(cfg.coated.size() == 2);
  CHECK(cfg.coated[0] == env::Surface::ceiling);
  CHECK(cfg.tile_side == 0.25);
  REQUIRE(cfg.transmitters.size() == 1);
  CHECK(cfg.transmitters[0].id == 9);
  CHECK(cfg.transmitters[0].frequency_hz == 2.4e9);
  CHECK(cfg.receiver.rows == 3);
  CHECK(cfg.receiver.cols == 4);
  CHECK(cfg.antenna_count() == 12);
  REQUIRE(cfg.occluders.size() == 1);
  CHECK(cfg.occluders[0].hi == geom::Vec3{1.0, 1.0, 1.0});
  CHECK(cfg.scatter_given);
  CHECK(cfg.scatter.mode == env::ScatterSpec::Mode::explicit_tiles);
  CHECK(cfg.scatter.tile_ids == std::vector<int>{4, 2});
  CHECK(cfg.theta_max_deg == 45.0);
  CHECK(cfg.grid_step_deg == 1.0);
  CHECK(cfg.reflection_loss_db == 2.5);
  CHECK(cfg.azimuth_density.kind == "triangular");
  REQUIRE(cfg.azimuth_density.mode_deg.has_value());
  CHECK(*cfg.azimuth_density.mode_deg == 100.0);
  CHECK(cfg.elevation_density.kind == "piecewise");
  CHECK(cfg.elevation_density.knots.size() == 3);
  REQUIRE(cfg.density_overrides.size() == 1);
  CHECK(cfg.density_overrides[0].antenna == 2);
  CHECK(cfg.density_overrides[0].axis == "elevation");
  CHECK(cfg.outer_iterations == 3);
  CHECK(cfg.gradient == "fd");
  CHECK(cfg.composite.levels == 500);
  CHECK(cfg.channel_kind == "distortion");
  CHECK(cfg.noise_sigma == 0.05);
  CHECK(cfg.blur_radius == 1);
  CHECK(cfg.shift_px == 2);
  CHECK(cfg.holdout_query_readings);
  CHECK(cfg.metrics == std::vector<std::string>{"ssim", "mi"});
  CHECK(cfg.query_poses == std::vector<int>{0, 1});
}

TEST_CASE("parse_config rejects malformed settings") {
  CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"corpus": {"source": "camera"}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"corpus": {"source": "directory"}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"scene": {"room": [1, 2]}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"scene": {"coated": ["floor"]}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"scene": {"scatter": {"mode": "diffuse"}}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"encoder": {"gradient": "newton"}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"metrics": ["hamming"]})")), ConfigError);
  CHECK_THROWS_AS(
      parse_config(json::parse(R"({"densities": {"azimuth": {"kind": "spline",
                                  "lo_deg": 0, "hi_deg": 1}}})")),
      ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"densities": {"azimuth": {"kind": "uniform"}}})")),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_config(json::parse(R"({"densities": {"overrides": [{"antenna": 0, "axis": "roll",
                                  "kind": "uniform", "lo_deg": 0, "hi_deg": 1}]}})")),
      ConfigError);
}

TEST_CASE("config digest is canonical and sensitive to effective changes") {
  const RunConfig a = parse_config(json::object());
  const RunConfig b = parse_config(json::parse(R"({"seed": 42})"));
  CHECK(config_digest(a) == config_digest(b));

  // round-trip through the canonical serialization keeps the digest
  const RunConfig c = parse_config(config_to_json(a));
  CHECK(config_digest(c) == config_digest(a));

  RunConfig seed_changed = a;
  seed_changed.seed = 43;
  CHECK(config_digest(seed_changed) != config_digest(a));
  RunConfig tile_changed = a;
  tile_changed.tile_side = 0.2;
  CHECK(config_digest(tile_changed) != config_digest(a));
  RunConfig metric_changed = a;
  metric_changed.metrics = {"l2"};
  CHECK(config_digest(metric_changed) != config_digest(a));

  // digest is 16 lowercase hex digits
  const std::string d = config_digest(a);
  CHECK(d.size() == 16);
  for (char ch : d) CHECK(((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f')));
}

TEST_CASE("make_densities applies per-antenna overrides") {
  RunConfig cfg = tiny_config();
  DensityOverride ov;
  ov.antenna = 1;
  ov.axis = "elevation";
  ov.spec = DensitySpec{"triangular", -5.0, 5.0, 0.0, {}};
  cfg.density_overrides = {ov};

  const auto densities = make_densities(cfg);
  REQUIRE(densities.size() == 6);
  CHECK(densities[0].elevation.range().lo_deg == -10.0);
  CHECK(densities[1].elevation.range().lo_deg == -5.0);
  CHECK(densities[1].elevation.range().hi_deg == 5.0);
  CHECK(densities[1].azimuth.range().lo_deg == 70.0);  // azimuth untouched
  CHECK(densities[2].elevation.range().lo_deg == -10.0);

  DensityOverride bad = ov;
  bad.antenna = 99;
  cfg.density_overrides = {bad};
  CHECK_THROWS_AS(make_densities(cfg), ConfigError);
}

TEST_CASE("stages demand their predecessors' artifacts") {
  const fs::path out = fresh_dir("order");
  const RunConfig cfg = tiny_config();

  CHECK_THROWS_WITH_AS(stage_encode(cfg, out), doctest::Contains("synth"),
                       MissingArtifactError);
  CHECK_THROWS_WITH_AS(stage_route(cfg, out), doctest::Contains("encode"),
                       MissingArtifactError);
  CHECK_THROWS_WITH_AS(stage_read(cfg, out), doctest::Contains("route"), MissingArtifactError);
  CHECK_THROWS_WITH_AS(stage_evaluate(cfg, out), doctest::Contains("synth"),
                       MissingArtifactError);
  CHECK_THROWS_WITH_AS(stage_report(cfg, out), doctest::Contains("evaluate"),
                       MissingArtifactError);
  fs::remove_all(out);
}

TEST_CASE("artifacts from a different configuration are rejected") {
  const fs::path out = fresh_dir("digest_mismatch");
  const RunConfig cfg = tiny_config();
  run_stage(cfg, out, "synth");
  run_stage(cfg, out, "encode");

  RunConfig other = cfg;
  other.seed = 999;
  CHECK_THROWS_WITH_AS(stage_route(other, out), doctest::Contains("different configuration"),
                       Error);
  fs::remove_all(out);
}

TEST_CASE("load_json_artifact distinguishes missing from malformed") {
  const fs::path out = fresh_dir("artifact_load");
  CHECK_THROWS_WITH_AS(load_json_artifact(out / "nope.json", "encode"),
                       doctest::Contains("run the encode stage first"), MissingArtifactError);
  std::ofstream(out / "bad.json") << "{ not json";
  CHECK_THROWS_WITH_AS(load_json_artifact(out / "bad.json", "encode"),
                       doctest::Contains("parse error"), Error);
  CHECK_THROWS_AS(load_json_artifact(out / "bad.json", "encode"), Error);
  fs::remove_all(out);
}

TEST_CASE("write_json_atomic creates parents and leaves no temp file") {
  const fs::path out = fresh_dir("atomic");
  const fs::path target = out / "nested" / "doc.json";
  write_json_atomic(json{{"k", 1}}, target);
  CHECK(fs::exists(target));
  CHECK_FALSE(fs::exists(target.string() + ".tmp"));
  const std::string text = slurp(target);
  CHECK(text.back() == '\n');
  CHECK(json::parse(text).at("k").get<int>() == 1);
  fs::remove_all(out);
}

TEST_CASE("run_all produces every artifact and a complete manifest") {
  const fs::path out = fresh_dir("run_all");
  const RunConfig cfg = tiny_config();
  run_all(cfg, out);

  for (const char* rel :
       {"corpus/manifest.json", "doa.json", "routes.json", "readings.json", "score_report.json",
        "score_report.csv", "per_query.csv", "report/objective_trace.csv", "report/report.txt",
        "manifest.json"}) {
    CHECK(fs::exists(out / rel));
  }

  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("config_digest").get<std::string>() == config_digest(cfg));
  for (const char* stage : {"synth", "encode", "route", "read", "evaluate", "report"}) {
    CHECK(manifest.at("stages").contains(stage));
  }

  const json doa = json::parse(slurp(out / "doa.json"));
  CHECK(doa.at("config_digest").get<std::string>() == config_digest(cfg));
  CHECK(doa.at("n").get<int>() == 3);
  CHECK(doa.at("m").get<int>() == cfg.slot_count());
  CHECK(doa.at("entries").size() == 3u * static_cast<unsigned>(cfg.slot_count()));

  const json score = json::parse(slurp(out / "score_report.json"));
  CHECK(score.at("n_queries").get<int>() == 3);
  REQUIRE(score.at("per_metric").size() == 2);
  // identity channel over the database itself must match perfectly
  for (const auto& ms : score.at("per_metric")) {
    CHECK(ms.at("matching_score").get<double>() == 1.0);
  }

  // composite images exist for each reading
  const json readings = json::parse(slurp(out / "readings.json"));
  for (const auto& r : readings.at("readings")) {
    CHECK(fs::exists(out / r.at("composite_file").get<std::string>()));
  }
  fs::remove_all(out);
}

TEST_CASE("identical reruns produce byte-identical artifacts") {
  const RunConfig cfg = tiny_config();
  const fs::path a = fresh_dir("rerun_a");
  const fs::path b = fresh_dir("rerun_b");
  run_all(cfg, a);
  run_all(cfg, b);
  for (const char* rel : {"doa.json", "routes.json", "readings.json", "score_report.json",
                          "score_report.csv", "per_query.csv"}) {
    CHECK(slurp(a / rel) == slurp(b / rel));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("scene warnings reach the stage manifest") {
  RunConfig cfg = tiny_config();
  cfg.tile_side = 0.11;  // does not divide the 4 m walls: inscribed-grid warning
  const fs::path out = fresh_dir("warnings");
  run_stage(cfg, out, "synth");
  run_stage(cfg, out, "encode");
  run_stage(cfg, out, "route");

  const json manifest = json::parse(slurp(out / "manifest.json"));
  const auto& warnings = manifest.at("stages").at("route").at("warnings");
  REQUIRE(!warnings.empty());
  bool saw_inscribed = false;
  for (const auto& w : warnings)
    if (w.get<std::string>().find("inscribed") != std::string::npos) saw_inscribed = true;
  CHECK(saw_inscribed);
  fs::remove_all(out);
}

TEST_CASE("a changed configuration resets the manifest ledger") {
  const fs::path out = fresh_dir("ledger");
  const RunConfig cfg = tiny_config();
  run_stage(cfg, out, "synth");
  json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("stages").contains("synth"));

  RunConfig other = cfg;
  other.seed = 1234;
  run_stage(other, out, "synth");
  manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("config_digest").get<std::string>() == config_digest(other));
  CHECK(manifest.at("stages").size() == 1);  // ledger restarted for the new digest
  fs::remove_all(out);
}

TEST_CASE("query pose filter controls the evaluate stage") {
  RunConfig cfg = tiny_config();
  cfg.rotations = 2;
  cfg.query_poses = {1};
  const fs::path out = fresh_dir("poses");
  run_stage(cfg, out, "synth");
  run_stage(cfg, out, "evaluate");  // identity channel needs only the corpus
  const json score = json::parse(slurp(out / "score_report.json"));
  CHECK(score.at("n_queries").get<int>() == 3);  // one pose per object
  for (const auto& r : score.at("log")) CHECK(r.at("query_pose").get<int>() == 1);
  fs::remove_all(out);

  RunConfig none = cfg;
  none.query_poses = {9};
  const fs::path out2 = fresh_dir("poses_none");
  run_stage(none, out2, "synth");
  CHECK_THROWS_WITH_AS(stage_evaluate(none, out2), doctest::Contains("no images"), Error);
  fs::remove_all(out2);
}

TEST_CASE("nearest-reading channel consumes decoded composite features") {
  RunConfig cfg = tiny_config();
  cfg.channel_kind = "nearest_reading";
  const fs::path out = fresh_dir("nearest");
  run_all(cfg, out);
  const json score = json::parse(slurp(out / "score_report.json"));
  CHECK(score.at("channel").get<std::string>() == "nearest_reading");
  CHECK(score.at("n_queries").get<int>() == 3);
  // features identical to the stored ones: retrieval must be perfect
  for (const auto& ms : score.at("per_metric")) {
    CHECK(ms.at("matching_score").get<double>() == 1.0);
  }
  fs::remove_all(out);
}

TEST_CASE("load_config reports unreadable and unparsable files") {
  CHECK_THROWS_AS(load_config("/nonexistent_zz/config.json"), ConfigError);
  const fs::path out = fresh_dir("load_config");
  std::ofstream(out / "broken.json") << "{";
  CHECK_THROWS_WITH_AS(load_config(out / "broken.json"), doctest::Contains("parse error"),
                       ConfigError);
  fs::remove_all(out);
}
