#include "pwe/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pwe/corpus.hpp"
#include "pwe/encoder.hpp"
#include "pwe/retrieval.hpp"
#include "pwe/router.hpp"

namespace pwe::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kTwoPi = 6.283185307179586476925286766559;

json vec3_to_json(const geom::Vec3& v) { return json::array({v.x, v.y, v.z}); }

geom::Vec3 vec3_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json density_to_json(const DensitySpec& d) {
  json j{{"kind", d.kind}, {"lo_deg", d.lo_deg}, {"hi_deg", d.hi_deg}};
  if (d.mode_deg) j["mode_deg"] = *d.mode_deg;
  if (!d.knots.empty()) {
    json k = json::array();
    for (const auto& [a, v] : d.knots) k.push_back(json::array({a, v}));
    j["knots"] = k;
  }
  return j;
}

DensitySpec density_from_json(const json& j, const std::string& what) {
  DensitySpec d;
  if (!j.is_object()) throw ConfigError(what + " must be an object");
  d.kind = j.value("kind", std::string("uniform"));
  if (d.kind != "uniform" && d.kind != "triangular" && d.kind != "piecewise")
    throw ConfigError(what + ": unknown density kind '" + d.kind + "'");
  if (!j.contains("lo_deg") || !j.contains("hi_deg"))
    throw ConfigError(what + " needs lo_deg and hi_deg");
  d.lo_deg = j.at("lo_deg").get<double>();
  d.hi_deg = j.at("hi_deg").get<double>();
  if (j.contains("mode_deg")) d.mode_deg = j.at("mode_deg").get<double>();
  if (j.contains("knots")) {
    for (const auto& k : j.at("knots")) {
      if (!k.is_array() || k.size() != 2)
        throw ConfigError(what + ".knots entries must be [angle, density] pairs");
      d.knots.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
  }
  return d;
}

codec::SteerabilityDensity build_density(const DensitySpec& d, codec::AngleAxis axis,
                                         int antenna) {
  codec::AngleRange range{d.lo_deg, d.hi_deg, axis, antenna};
  if (d.kind == "uniform") return codec::SteerabilityDensity::uniform(range);
  if (d.kind == "triangular") {
    if (d.mode_deg) return codec::SteerabilityDensity::triangular(range, *d.mode_deg);
    return codec::SteerabilityDensity::triangular(range);
  }
  std::vector<codec::DensityKnot> knots;
  knots.reserve(d.knots.size());
  for (const auto& [a, v] : d.knots) knots.push_back({a, v});
  return codec::SteerabilityDensity::piecewise_linear(range, knots);
}

std::vector<env::Transmitter> default_transmitters() {
  return {{0, {-2.0, -3.5, 1.75}, 5e9},
          {1, {-2.0, 3.5, 1.75}, 5e9},
          {2, {2.0, -3.5, 1.75}, 5e9},
          {3, {2.0, 3.5, 1.75}, 5e9}};
}

env::ScatterSpec default_scatter() {
  env::ScatterSpec s;
  s.mode = env::ScatterSpec::Mode::specular;
  s.centroid = {0.0, 0.0, 1.5};
  s.facet_normals = {{0.0, 0.0, 1.0},  {0.3, -0.6, 0.74},  {-0.3, -0.6, 0.74},
                     {0.6, 0.2, 0.77}, {-0.6, 0.2, 0.77},  {0.2, 0.8, 0.57},
                     {-0.2, 0.8, 0.57}, {0.0, -0.9, 0.44}};
  return s;
}

// Empty transmitter/shape lists and an unset scatter stand for the bundled
// defaults; resolving them here keeps the digest canonical.
RunConfig effective(RunConfig cfg) {
  if (cfg.transmitters.empty()) cfg.transmitters = default_transmitters();
  if (cfg.shapes.empty()) cfg.shapes = default_shapes();
  if (!cfg.scatter_given) cfg.scatter = default_scatter();
  return cfg;
}

std::string stage_command(const std::string& artifact) {
  return "missing artifact " + artifact;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json score_to_json(double v) {
  if (std::isinf(v)) return json(v > 0 ? "inf" : "-inf");
  return json(v);
}

struct CorpusArtifacts {
  std::vector<corpus::GrayImage> images;
};

CorpusArtifacts load_corpus_artifact(const fs::path& out) {
  const fs::path manifest = out / "corpus" / "manifest.json";
  if (!fs::exists(manifest))
    throw MissingArtifactError(stage_command((out / "corpus").string()) +
                               "; run the synth stage first");
  return {corpus::load_corpus(out / "corpus")};
}

struct DoaArtifact {
  encoder::DoAMatrix matrix;
  std::vector<std::pair<int, int>> image_ids;  // (object, pose) per row
};

DoaArtifact load_doa_artifact(const fs::path& out, const std::string& digest) {
  const fs::path path = out / "doa.json";
  const json j = load_json_artifact(path, "encode");
  if (j.value("config_digest", std::string()) != digest)
    throw Error("artifact " + path.string() + " was produced by a different configuration");
  DoaArtifact a;
  a.matrix.n = j.at("n").get<int>();
  a.matrix.m = j.at("m").get<int>();
  a.matrix.entries = j.at("entries").get<std::vector<double>>();
  if (a.matrix.entries.size() != static_cast<std::size_t>(a.matrix.n) * a.matrix.m)
    throw Error("doa.json entry count does not match its dimensions");
  for (const auto& img : j.at("images"))
    a.image_ids.emplace_back(img.at("object_id").get<int>(), img.at("pose_id").get<int>());
  if (a.image_ids.size() != static_cast<std::size_t>(a.matrix.n))
    throw Error("doa.json image list does not match row count");
  return a;
}

}  // namespace

std::vector<std::string> default_shapes() {
  return {"square", "triangle", "ellipse", "cross",    "star",  "hexagon",
          "bar",    "lshape",   "diamond", "crescent", "notch", "tee"};
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration root must be a JSON object");
  RunConfig cfg;
  cfg.transmitters = default_transmitters();
  cfg.scatter = default_scatter();
  cfg.shapes = default_shapes();

  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("corpus")) {
    const json& c = j.at("corpus");
    cfg.corpus_source = c.value("source", cfg.corpus_source);
    if (cfg.corpus_source != "synth" && cfg.corpus_source != "directory")
      throw ConfigError("corpus.source must be 'synth' or 'directory'");
    cfg.corpus_directory = c.value("directory", cfg.corpus_directory);
    if (cfg.corpus_source == "directory" && cfg.corpus_directory.empty())
      throw ConfigError("corpus.directory is required when corpus.source is 'directory'");
    if (c.contains("shapes")) cfg.shapes = c.at("shapes").get<std::vector<std::string>>();
    cfg.rotations = c.value("rotations", cfg.rotations);
    cfg.morph_steps = c.value("morph_steps", cfg.morph_steps);
    cfg.image_width = c.value("width", cfg.image_width);
    cfg.image_height = c.value("height", cfg.image_height);
  }

  if (j.contains("scene")) {
    const json& s = j.at("scene");
    if (s.contains("room")) cfg.room_dims = vec3_from_json(s.at("room"), "scene.room");
    if (s.contains("coated")) {
      cfg.coated.clear();
      for (const auto& name : s.at("coated"))
        cfg.coated.push_back(env::surface_from_name(name.get<std::string>()));
    }
    cfg.tile_side = s.value("tile_side", cfg.tile_side);
    if (s.contains("transmitters")) {
      cfg.transmitters.clear();
      for (const auto& t : s.at("transmitters")) {
        env::Transmitter tx;
        tx.id = t.value("id", static_cast<int>(cfg.transmitters.size()));
        tx.position = vec3_from_json(t.at("position"), "transmitter position");
        tx.frequency_hz = t.value("frequency_hz", 5e9);
        cfg.transmitters.push_back(tx);
      }
    }
    if (s.contains("receiver")) {
      const json& r = s.at("receiver");
      if (r.contains("center"))
        cfg.receiver.center = vec3_from_json(r.at("center"), "receiver center");
      cfg.receiver.rows = r.value("rows", cfg.receiver.rows);
      cfg.receiver.cols = r.value("cols", cfg.receiver.cols);
      cfg.receiver.spacing_m = r.value("spacing_m", cfg.receiver.spacing_m);
    }
    if (s.contains("occluders")) {
      for (const auto& o : s.at("occluders"))
        cfg.occluders.push_back({vec3_from_json(o.at("lo"), "occluder lo"),
                                 vec3_from_json(o.at("hi"), "occluder hi")});
    }
    if (s.contains("scatter")) {
      const json& sc = s.at("scatter");
      cfg.scatter = env::ScatterSpec{};
      cfg.scatter_given = true;
      const std::string mode = sc.value("mode", std::string("specular"));
      if (mode == "explicit") {
        cfg.scatter.mode = env::ScatterSpec::Mode::explicit_tiles;
        cfg.scatter.tile_ids = sc.at("tiles").get<std::vector<int>>();
      } else if (mode == "specular") {
        cfg.scatter.mode = env::ScatterSpec::Mode::specular;
        cfg.scatter.centroid = sc.contains("centroid")
                                   ? vec3_from_json(sc.at("centroid"), "scatter.centroid")
                                   : geom::Vec3{0.0, 0.0, 1.5};
        if (sc.contains("facet_normals")) {
          for (const auto& n : sc.at("facet_normals"))
            cfg.scatter.facet_normals.push_back(vec3_from_json(n, "facet normal"));
        } else {
          cfg.scatter.facet_normals = default_scatter().facet_normals;
        }
      } else {
        throw ConfigError("scene.scatter.mode must be 'explicit' or 'specular'");
      }
    }
    cfg.theta_max_deg = s.value("theta_max_deg", cfg.theta_max_deg);
    cfg.grid_step_deg = s.value("grid_step_deg", cfg.grid_step_deg);
    cfg.reflection_loss_db = s.value("reflection_loss_db", cfg.reflection_loss_db);
    cfg.route_transmitter = s.value("route_transmitter", cfg.route_transmitter);
  }

  if (j.contains("densities")) {
    const json& d = j.at("densities");
    if (d.contains("azimuth"))
      cfg.azimuth_density = density_from_json(d.at("azimuth"), "densities.azimuth");
    if (d.contains("elevation"))
      cfg.elevation_density = density_from_json(d.at("elevation"), "densities.elevation");
    if (d.contains("overrides")) {
      for (const auto& o : d.at("overrides")) {
        DensityOverride ov;
        ov.antenna = o.at("antenna").get<int>();
        ov.axis = o.at("axis").get<std::string>();
        if (ov.axis != "azimuth" && ov.axis != "elevation")
          throw ConfigError("density override axis must be 'azimuth' or 'elevation'");
        ov.spec = density_from_json(o, "density override");
        cfg.density_overrides.push_back(ov);
      }
    }
  }

  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    cfg.outer_iterations = e.value("outer_iterations", cfg.outer_iterations);
    cfg.gradient = e.value("gradient", cfg.gradient);
    if (cfg.gradient != "analytic" && cfg.gradient != "fd")
      throw ConfigError("encoder.gradient must be 'analytic' or 'fd'");
    cfg.bound_epsilon = e.value("bound_epsilon", cfg.bound_epsilon);
  }

  if (j.contains("composite")) {
    const json& c = j.at("composite");
    cfg.composite.levels = c.value("levels", cfg.composite.levels);
    cfg.composite.band_height = c.value("band_height", cfg.composite.band_height);
    cfg.composite.loss_min_db = c.value("loss_min_db", cfg.composite.loss_min_db);
    cfg.composite.loss_max_db = c.value("loss_max_db", cfg.composite.loss_max_db);
  }

  if (j.contains("channel")) {
    const json& c = j.at("channel");
    cfg.channel_kind = c.value("kind", cfg.channel_kind);
    if (cfg.channel_kind != "identity" && cfg.channel_kind != "distortion" &&
        cfg.channel_kind != "nearest_reading")
      throw ConfigError("channel.kind must be identity, distortion, or nearest_reading");
    cfg.noise_sigma = c.value("noise_sigma", cfg.noise_sigma);
    cfg.blur_radius = c.value("blur_radius", cfg.blur_radius);
    cfg.shift_px = c.value("shift_px", cfg.shift_px);
    cfg.holdout_query_readings = c.value("holdout_query_readings", cfg.holdout_query_readings);
  }

  if (j.contains("metrics")) cfg.metrics = j.at("metrics").get<std::vector<std::string>>();
  for (const auto& m : cfg.metrics) retrieval::metric_from_name(m);  // validate early

  if (j.contains("retrieval")) {
    const json& r = j.at("retrieval");
    if (r.contains("query_poses")) cfg.query_poses = r.at("query_poses").get<std::vector<int>>();
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const RunConfig& raw) {
  const RunConfig cfg = effective(raw);
  json scatter;
  if (cfg.scatter.mode == env::ScatterSpec::Mode::explicit_tiles) {
    scatter = json{{"mode", "explicit"}, {"tiles", cfg.scatter.tile_ids}};
  } else {
    json normals = json::array();
    for (const auto& n : cfg.scatter.facet_normals) normals.push_back(vec3_to_json(n));
    scatter = json{{"mode", "specular"},
                   {"centroid", vec3_to_json(cfg.scatter.centroid)},
                   {"facet_normals", normals}};
  }
  json transmitters = json::array();
  for (const auto& t : cfg.transmitters)
    transmitters.push_back(json{{"id", t.id},
                                {"position", vec3_to_json(t.position)},
                                {"frequency_hz", t.frequency_hz}});
  json occluders = json::array();
  for (const auto& o : cfg.occluders)
    occluders.push_back(json{{"lo", vec3_to_json(o.lo)}, {"hi", vec3_to_json(o.hi)}});
  json coated = json::array();
  for (auto s : cfg.coated) coated.push_back(env::surface_name(s));
  json overrides = json::array();
  for (const auto& ov : cfg.density_overrides) {
    json o = density_to_json(ov.spec);
    o["antenna"] = ov.antenna;
    o["axis"] = ov.axis;
    overrides.push_back(o);
  }

  return json{
      {"seed", cfg.seed},
      {"corpus",
       {{"source", cfg.corpus_source},
        {"directory", cfg.corpus_directory},
        {"shapes", cfg.shapes},
        {"rotations", cfg.rotations},
        {"morph_steps", cfg.morph_steps},
        {"width", cfg.image_width},
        {"height", cfg.image_height}}},
      {"scene",
       {{"room", vec3_to_json(cfg.room_dims)},
        {"coated", coated},
        {"tile_side", cfg.tile_side},
        {"transmitters", transmitters},
        {"receiver",
         {{"center", vec3_to_json(cfg.receiver.center)},
          {"rows", cfg.receiver.rows},
          {"cols", cfg.receiver.cols},
          {"spacing_m", cfg.receiver.spacing_m}}},
        {"occluders", occluders},
        {"scatter", scatter},
        {"theta_max_deg", cfg.theta_max_deg},
        {"grid_step_deg", cfg.grid_step_deg},
        {"reflection_loss_db", cfg.reflection_loss_db},
        {"route_transmitter", cfg.route_transmitter}}},
      {"densities",
       {{"azimuth", density_to_json(cfg.azimuth_density)},
        {"elevation", density_to_json(cfg.elevation_density)},
        {"overrides", overrides}}},
      {"encoder",
       {{"outer_iterations", cfg.outer_iterations},
        {"gradient", cfg.gradient},
        {"bound_epsilon", cfg.bound_epsilon}}},
      {"composite",
       {{"levels", cfg.composite.levels},
        {"band_height", cfg.composite.band_height},
        {"loss_min_db", cfg.composite.loss_min_db},
        {"loss_max_db", cfg.composite.loss_max_db}}},
      {"channel",
       {{"kind", cfg.channel_kind},
        {"noise_sigma", cfg.noise_sigma},
        {"blur_radius", cfg.blur_radius},
        {"shift_px", cfg.shift_px},
        {"holdout_query_readings", cfg.holdout_query_readings}}},
      {"metrics", cfg.metrics},
      {"retrieval", {{"query_poses", cfg.query_poses}}}};
}

std::string config_digest(const RunConfig& cfg) {
  return to_hex(fnv1a64(config_to_json(cfg).dump()));
}

env::Environment make_scene(const RunConfig& raw) {
  const RunConfig cfg = effective(raw);
  env::Room room;
  room.dims = cfg.room_dims;
  room.coated = cfg.coated;
  return env::make_environment(room, cfg.tile_side, cfg.transmitters, cfg.receiver,
                               cfg.occluders, cfg.scatter, cfg.theta_max_deg,
                               cfg.grid_step_deg);
}

std::vector<codec::AntennaDensities> make_densities(const RunConfig& cfg) {
  const int m = cfg.antenna_count();
  std::vector<codec::AntennaDensities> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    out.push_back({build_density(cfg.azimuth_density, codec::AngleAxis::azimuth, a),
                   build_density(cfg.elevation_density, codec::AngleAxis::elevation, a)});
  }
  for (const auto& ov : cfg.density_overrides) {
    if (ov.antenna < 0 || ov.antenna >= m)
      throw ConfigError("density override names an antenna outside the array");
    if (ov.axis == "azimuth")
      out[static_cast<std::size_t>(ov.antenna)].azimuth =
          build_density(ov.spec, codec::AngleAxis::azimuth, ov.antenna);
    else
      out[static_cast<std::size_t>(ov.antenna)].elevation =
          build_density(ov.spec, codec::AngleAxis::elevation, ov.antenna);
  }
  return out;
}

void write_json_atomic(const json& j, const fs::path& path) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out << j.dump(2) << "\n";
    if (!out) throw Error("failed writing: " + tmp.string());
  }
  fs::rename(tmp, path);
}

json load_json_artifact(const fs::path& path, const std::string& producing_stage) {
  std::ifstream in(path);
  if (!in)
    throw MissingArtifactError("missing artifact " + path.string() + "; run the " +
                               producing_stage + " stage first");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error("artifact parse error in " + path.string() + ": " + e.what());
  }
  return j;
}

StageResult stage_synth(const RunConfig& raw, const fs::path& out) {
  const RunConfig cfg = effective(raw);
  StageResult res;
  std::vector<corpus::GrayImage> images;
  if (cfg.corpus_source == "synth") {
    corpus::SynthSpec spec;
    spec.shapes = cfg.shapes;
    spec.rotations = cfg.rotations;
    spec.morph_steps = cfg.morph_steps;
    spec.width = cfg.image_width;
    spec.height = cfg.image_height;
    images = corpus::synthesize_corpus(spec, cfg.seed);
  } else {
    images = corpus::load_corpus(cfg.corpus_directory);
  }
  corpus::save_corpus(images, out / "corpus");
  res.artifacts.push_back("corpus/manifest.json");
  return res;
}

StageResult stage_encode(const RunConfig& cfg, const fs::path& out) {
  StageResult res;
  const auto corp = load_corpus_artifact(out);
  std::vector<corpus::ImageVector> vectors;
  vectors.reserve(corp.images.size());
  for (const auto& img : corp.images) vectors.push_back(corpus::vectorize(img));
  const corpus::CorrelationMatrix R = corpus::correlation_matrix(vectors);

  encoder::EncoderSettings settings;
  settings.gradient = cfg.gradient == "fd" ? encoder::GradientMode::finite_difference
                                           : encoder::GradientMode::analytic;
  settings.bound_epsilon = cfg.bound_epsilon;
  auto [D, report] = encoder::encode(R, cfg.slot_count(), cfg.outer_iterations, cfg.seed,
                                     settings);

  json images = json::array();
  for (const auto& img : corp.images)
    images.push_back(json{{"object_id", img.object_id}, {"pose_id", img.pose_id}});
  const json doc{{"config_digest", config_digest(cfg)},
                 {"n", D.n},
                 {"m", D.m},
                 {"entries", D.entries},
                 {"seed", report.seed},
                 {"initial_objective", report.initial_objective},
                 {"final_objective", report.final_objective},
                 {"outer_iterations", report.outer_iterations},
                 {"objective_trace", report.per_iteration_objective},
                 {"images", images}};
  write_json_atomic(doc, out / "doa.json");
  res.artifacts.push_back("doa.json");
  if (report.final_objective > report.initial_objective)
    res.warnings.push_back("objective increased; check encoder settings");
  return res;
}

StageResult stage_route(const RunConfig& cfg, const fs::path& out) {
  StageResult res;
  const std::string digest = config_digest(cfg);
  const DoaArtifact doa = load_doa_artifact(out, digest);
  if (doa.matrix.m != cfg.slot_count())
    throw ConfigError("doa.json slot count does not match the receiver array (expected " +
                      std::to_string(cfg.slot_count()) + ")");

  env::Environment scene = make_scene(cfg);
  for (const auto& w : scene.warnings) res.warnings.push_back(w);
  const env::PWEGraph graph = env::build_graph(scene);
  const auto densities = make_densities(cfg);

  if (cfg.route_transmitter < 0 ||
      cfg.route_transmitter >= static_cast<int>(scene.transmitters.size()))
    throw ConfigError("route_transmitter is out of range");
  const env::Transmitter& tx = scene.transmitters[static_cast<std::size_t>(cfg.route_transmitter)];

  const auto entries = env::entry_tiles(scene, scene.scatter, tx);
  if (entries.empty()) throw route::RoutingError("scatter produced no entry tiles");
  std::vector<int> entry_ids;
  entry_ids.reserve(entries.size());
  for (const auto& t : entries) entry_ids.push_back(t.id);

  route::CandidateCache cache(graph);
  route::LayeredPaths paths(graph, entry_ids);

  json readings = json::array();
  int failures = 0;
  int successes = 0;
  double max_error = 0.0;
  for (int i = 0; i < doa.matrix.n; ++i) {
    const codec::DirectionalTargets targets =
        codec::decode_matrix_row(doa.matrix.row(i), densities);
    const auto outcomes = route::route_all(graph, entry_ids, targets, &cache, &paths);
    json antennas = json::array();
    for (const auto& o : outcomes) {
      json a{{"antenna", o.antenna_index}};
      if (o.ok()) {
        const route::Route& r = *o.route;
        const route::PropagationResult pr =
            route::propagate(r, tx.frequency_hz, cfg.reflection_loss_db);
        a["ok"] = true;
        a["nodes"] = r.nodes;
        a["hop_lengths"] = r.hop_lengths;
        a["achieved_azimuth_deg"] = r.achieved.az_deg;
        a["achieved_elevation_deg"] = r.achieved.el_deg;
        a["angular_error_deg"] = r.angular_error_deg;
        a["path_loss_db"] = pr.path_loss_db;
        a["phase_rad"] = pr.phase_rad;
        max_error = std::max(max_error, r.angular_error_deg);
        ++successes;
      } else {
        a["ok"] = false;
        a["message"] = o.failure->message;
        a["achieved_azimuth_deg"] = o.failure->best_achieved.az_deg;
        a["achieved_elevation_deg"] = o.failure->best_achieved.el_deg;
        a["angular_error_deg"] = o.failure->best_error_deg;
        ++failures;
      }
      antennas.push_back(std::move(a));
    }
    readings.push_back(json{{"object_id", doa.image_ids[static_cast<std::size_t>(i)].first},
                            {"pose_id", doa.image_ids[static_cast<std::size_t>(i)].second},
                            {"antennas", std::move(antennas)}});
  }

  const int total = doa.matrix.n * graph.antenna_count();
  const json doc{{"config_digest", digest},
                 {"transmitter", tx.id},
                 {"frequency_hz", tx.frequency_hz},
                 {"reflection_loss_db", cfg.reflection_loss_db},
                 {"grid_step_deg", cfg.grid_step_deg},
                 {"entry_tiles", entry_ids},
                 {"success_rate", total ? static_cast<double>(successes) / total : 0.0},
                 {"max_angular_error_deg", max_error},
                 {"readings", readings}};
  write_json_atomic(doc, out / "routes.json");
  res.artifacts.push_back("routes.json");
  if (failures > 0)
    res.warnings.push_back("routing failed for " + std::to_string(failures) + " of " +
                           std::to_string(total) + " antenna targets");
  return res;
}

StageResult stage_read(const RunConfig& cfg, const fs::path& out) {
  StageResult res;
  const std::string digest = config_digest(cfg);
  const json routes = load_json_artifact(out / "routes.json", "route");
  if (routes.value("config_digest", std::string()) != digest)
    throw Error("artifact " + (out / "routes.json").string() +
                " was produced by a different configuration");

  const auto densities = make_densities(cfg);
  const int m = cfg.antenna_count();
  int clamped_angles = 0;
  int total_clamped_components = 0;

  json readings_out = json::array();
  for (const auto& entry : routes.at("readings")) {
    reading::RFReading r;
    r.object_id = entry.at("object_id").get<int>();
    r.pose_id = entry.at("pose_id").get<int>();
    const auto& antennas = entry.at("antennas");
    if (static_cast<int>(antennas.size()) != m)
      throw Error("routes.json antenna count does not match the receiver array");
    for (const auto& a : antennas) {
      reading::AntennaRecord rec;
      rec.azimuth_deg = a.at("achieved_azimuth_deg").get<double>();
      rec.elevation_deg = a.at("achieved_elevation_deg").get<double>();
      if (a.at("ok").get<bool>()) {
        rec.path_loss_db = a.at("path_loss_db").get<double>();
        rec.phase_rad = a.at("phase_rad").get<double>();
      } else {
        // Best-effort record: worst-case loss, zero phase, flagged below.
        rec.path_loss_db = cfg.composite.loss_max_db;
        rec.phase_rad = 0.0;
        r.failed_antennas.push_back(a.at("antenna").get<int>());
      }
      r.records.push_back(rec);
    }

    // Quantization can push an achieved angle just past its density range;
    // clamp here so renormalize stays within its contract.
    for (int i = 0; i < m; ++i) {
      auto& rec = r.records[static_cast<std::size_t>(i)];
      const auto& az = densities[static_cast<std::size_t>(i)].azimuth.range();
      const auto& el = densities[static_cast<std::size_t>(i)].elevation.range();
      const double az_c = std::clamp(rec.azimuth_deg, az.lo_deg, az.hi_deg);
      const double el_c = std::clamp(rec.elevation_deg, el.lo_deg, el.hi_deg);
      if (az_c != rec.azimuth_deg || el_c != rec.elevation_deg) ++clamped_angles;
      rec.azimuth_deg = az_c;
      rec.elevation_deg = el_c;
    }

    const reading::NormalizedReading norm = reading::renormalize(r, densities);
    const reading::CompositeImage composite = reading::colormap_encode(norm, cfg.composite);
    total_clamped_components += composite.clamped_components;
    const reading::DecodedComposite decoded = reading::colormap_decode(composite, cfg.composite);

    std::ostringstream ppm_name;
    ppm_name << "readings/obj" << r.object_id << "_pose" << r.pose_id << ".ppm";
    fs::create_directories(out / "readings");
    reading::save_ppm(composite, (out / ppm_name.str()).string());

    json records = json::array();
    for (const auto& rec : r.records)
      records.push_back(json{{"azimuth_deg", rec.azimuth_deg},
                             {"elevation_deg", rec.elevation_deg},
                             {"path_loss_db", rec.path_loss_db},
                             {"phase_rad", rec.phase_rad}});
    json norm_json = json::array();
    for (const auto& nr : norm.records)
      norm_json.push_back(json{{"azimuth01", nr.azimuth01}, {"elevation01", nr.elevation01}});
    readings_out.push_back(json{{"object_id", r.object_id},
                                {"pose_id", r.pose_id},
                                {"records", records},
                                {"failed_antennas", r.failed_antennas},
                                {"normalized", norm_json},
                                {"composite_file", ppm_name.str()},
                                {"features",
                                 {{"azimuth01", decoded.azimuth01},
                                  {"elevation01", decoded.elevation01},
                                  {"loss01", decoded.loss01},
                                  {"phase01", decoded.phase01}}}});
  }

  const json doc{{"config_digest", digest},
                 {"levels", cfg.composite.levels},
                 {"band_height", cfg.composite.band_height},
                 {"loss_min_db", cfg.composite.loss_min_db},
                 {"loss_max_db", cfg.composite.loss_max_db},
                 {"readings", readings_out}};
  write_json_atomic(doc, out / "readings.json");
  res.artifacts.push_back("readings.json");
  if (clamped_angles > 0)
    res.warnings.push_back(std::to_string(clamped_angles) +
                           " achieved angles clamped into their density ranges");
  if (total_clamped_components > 0)
    res.warnings.push_back(std::to_string(total_clamped_components) +
                           " composite components clamped into [0,1]");
  return res;
}

namespace {

std::vector<double> features_from_json(const json& f) {
  std::vector<double> v;
  for (const char* key : {"azimuth01", "elevation01", "loss01", "phase01"}) {
    for (const auto& x : f.at(key)) v.push_back(x.get<double>());
  }
  return v;
}

retrieval::Channel build_channel(const RunConfig& cfg, const fs::path& out,
                                 const std::vector<corpus::GrayImage>& database,
                                 const std::set<std::pair<int, int>>& query_keys,
                                 std::map<std::pair<int, int>, std::vector<double>>* features) {
  retrieval::Channel ch = retrieval::channel_from_name(cfg.channel_kind);
  ch.noise_sigma = cfg.noise_sigma;
  ch.blur_radius = cfg.blur_radius;
  ch.shift_px = cfg.shift_px;
  if (ch.kind != retrieval::Channel::Kind::nearest_reading) return ch;

  const json readings = load_json_artifact(out / "readings.json", "read");
  if (readings.value("config_digest", std::string()) != config_digest(cfg))
    throw Error("artifact " + (out / "readings.json").string() +
                " was produced by a different configuration");
  std::map<std::pair<int, int>, std::vector<double>> by_id;
  for (const auto& r : readings.at("readings")) {
    by_id[{r.at("object_id").get<int>(), r.at("pose_id").get<int>()}] =
        features_from_json(r.at("features"));
  }
  for (const auto& img : database) {
    auto it = by_id.find({img.object_id, img.pose_id});
    if (it == by_id.end()) continue;  // no reading for this image
    if (cfg.holdout_query_readings && query_keys.count({img.object_id, img.pose_id})) continue;
    ch.store.push_back({it->second, img});
  }
  *features = std::move(by_id);
  return ch;
}

}  // namespace

StageResult stage_evaluate(const RunConfig& cfg, const fs::path& out) {
  StageResult res;
  const std::string digest = config_digest(cfg);
  const auto corp = load_corpus_artifact(out);

  std::vector<corpus::GrayImage> queries;
  for (const auto& img : corp.images) {
    if (cfg.query_poses.empty() ||
        std::find(cfg.query_poses.begin(), cfg.query_poses.end(), img.pose_id) !=
            cfg.query_poses.end())
      queries.push_back(img);
  }
  if (queries.empty()) throw Error("query pose filter selected no images");

  std::set<std::pair<int, int>> query_keys;
  for (const auto& q : queries) query_keys.insert({q.object_id, q.pose_id});
  std::map<std::pair<int, int>, std::vector<double>> features;
  const retrieval::Channel channel = build_channel(cfg, out, corp.images, query_keys, &features);

  retrieval::EvaluateInputs in;
  in.database = corp.images;
  in.queries = queries;
  in.channel = &channel;
  for (const auto& m : cfg.metrics) in.metrics.push_back(retrieval::metric_from_name(m));
  in.run_seed = cfg.seed;
  in.query_features = features.empty() ? nullptr : &features;

  const retrieval::ScoreReport report = retrieval::evaluate(in);

  json per_metric = json::array();
  for (const auto& ms : report.per_metric)
    per_metric.push_back(json{{"metric", retrieval::name_of(ms.metric)},
                              {"matching_score", ms.matching_score},
                              {"angle_mismatch_share", ms.angle_share},
                              {"object_mismatch_share", ms.object_share},
                              {"n_correct", ms.n_correct},
                              {"n_angle_mismatch", ms.n_angle},
                              {"n_object_mismatch", ms.n_object}});
  json log = json::array();
  for (const auto& r : report.log)
    log.push_back(json{{"metric", retrieval::name_of(r.metric)},
                       {"query_object", r.query_object},
                       {"query_pose", r.query_pose},
                       {"matched_object", r.matched_object},
                       {"matched_pose", r.matched_pose},
                       {"score", score_to_json(r.score)},
                       {"classification", retrieval::name_of(r.classification)}});
  const json doc{{"config_digest", digest},
                 {"channel", cfg.channel_kind},
                 {"n_queries", report.n_queries},
                 {"per_metric", per_metric},
                 {"log", log}};
  write_json_atomic(doc, out / "score_report.json");
  res.artifacts.push_back("score_report.json");

  {
    std::ofstream csv(out / "score_report.csv");
    csv << "metric,matching_score,angle_mismatch_share,object_mismatch_share,"
           "n_correct,n_angle_mismatch,n_object_mismatch,n_queries\n";
    for (const auto& ms : report.per_metric)
      csv << retrieval::name_of(ms.metric) << "," << format_double(ms.matching_score) << ","
          << format_double(ms.angle_share) << "," << format_double(ms.object_share) << ","
          << ms.n_correct << "," << ms.n_angle << "," << ms.n_object << "," << report.n_queries
          << "\n";
  }
  res.artifacts.push_back("score_report.csv");
  {
    std::ofstream csv(out / "per_query.csv");
    csv << "metric,query_object,query_pose,matched_object,matched_pose,score,classification\n";
    for (const auto& r : report.log)
      csv << retrieval::name_of(r.metric) << "," << r.query_object << "," << r.query_pose << ","
          << r.matched_object << "," << r.matched_pose << "," << format_double(r.score) << ","
          << retrieval::name_of(r.classification) << "\n";
  }
  res.artifacts.push_back("per_query.csv");
  return res;
}

StageResult stage_report(const RunConfig& cfg, const fs::path& out) {
  StageResult res;
  const std::string digest = config_digest(cfg);
  const json score = load_json_artifact(out / "score_report.json", "evaluate");
  const json doa = load_json_artifact(out / "doa.json", "encode");

  fs::create_directories(out / "report");
  {
    std::ofstream csv(out / "report" / "objective_trace.csv");
    csv << "iteration,objective\n";
    csv << "0," << format_double(doa.at("initial_objective").get<double>()) << "\n";
    int it = 1;
    for (const auto& v : doa.at("objective_trace"))
      csv << it++ << "," << format_double(v.get<double>()) << "\n";
  }
  res.artifacts.push_back("report/objective_trace.csv");

  // Example triplets: ground truth next to the reconstruction-channel output,
  // with the composite referenced from the read stage when present.
  const auto corp = load_corpus_artifact(out);
  std::set<std::pair<int, int>> query_keys;
  std::map<std::pair<int, int>, std::vector<double>> features;
  std::vector<corpus::GrayImage> queries;
  for (const auto& img : corp.images) {
    if (cfg.query_poses.empty() ||
        std::find(cfg.query_poses.begin(), cfg.query_poses.end(), img.pose_id) !=
            cfg.query_poses.end())
      queries.push_back(img);
  }
  for (const auto& q : queries) query_keys.insert({q.object_id, q.pose_id});
  const retrieval::Channel channel = build_channel(cfg, out, corp.images, query_keys, &features);
  const int triplets = std::min<int>(3, static_cast<int>(queries.size()));
  for (int k = 0; k < triplets; ++k) {
    const corpus::GrayImage& q = queries[static_cast<std::size_t>(k)];
    std::ostringstream key;
    key << cfg.seed << "/" << q.object_id << "/" << q.pose_id;
    std::span<const double> feat;
    if (channel.kind == retrieval::Channel::Kind::nearest_reading)
      feat = features.at({q.object_id, q.pose_id});
    const corpus::GrayImage candidate =
        retrieval::reconstruct(channel, feat, q, fnv1a64(key.str()));
    std::ostringstream base;
    base << "report/triplet" << k << "_obj" << q.object_id << "_pose" << q.pose_id;
    corpus::save_pgm(q, out / (base.str() + "_truth.pgm"));
    corpus::save_pgm(candidate, out / (base.str() + "_candidate.pgm"));
    res.artifacts.push_back(base.str() + "_truth.pgm");
    res.artifacts.push_back(base.str() + "_candidate.pgm");
  }

  {
    std::ofstream txt(out / "report" / "report.txt");
    txt << "run digest: " << digest << "\n";
    txt << "channel: " << score.at("channel").get<std::string>() << "\n";
    txt << "queries: " << score.at("n_queries").get<int>() << "\n\n";
    txt << "metric          matching  angle-mm  object-mm\n";
    for (const auto& ms : score.at("per_metric")) {
      char line[128];
      std::snprintf(line, sizeof(line), "%-15s %8.4f  %8.4f  %9.4f\n",
                    ms.at("metric").get<std::string>().c_str(),
                    ms.at("matching_score").get<double>(),
                    ms.at("angle_mismatch_share").get<double>(),
                    ms.at("object_mismatch_share").get<double>());
      txt << line;
    }
    txt << "\nmismatches:\n";
    bool any = false;
    for (const auto& r : score.at("log")) {
      if (r.at("classification").get<std::string>() == "correct") continue;
      any = true;
      txt << "  [" << r.at("metric").get<std::string>() << "] object "
          << r.at("query_object").get<int>() << " pose " << r.at("query_pose").get<int>()
          << " -> object " << r.at("matched_object").get<int>() << " pose "
          << r.at("matched_pose").get<int>() << " (" << r.at("classification").get<std::string>()
          << ")\n";
    }
    if (!any) txt << "  none\n";
    txt << "\nobjective trace: report/objective_trace.csv\n";
  }
  res.artifacts.push_back("report/report.txt");
  return res;
}

namespace {

StageResult dispatch_stage(const RunConfig& cfg, const fs::path& out, const std::string& stage) {
  if (stage == "synth") return stage_synth(cfg, out);
  if (stage == "encode") return stage_encode(cfg, out);
  if (stage == "route") return stage_route(cfg, out);
  if (stage == "read") return stage_read(cfg, out);
  if (stage == "evaluate") return stage_evaluate(cfg, out);
  if (stage == "report") return stage_report(cfg, out);
  throw ConfigError("unknown stage: " + stage);
}

}  // namespace

void run_stage(const RunConfig& cfg, const fs::path& out, const std::string& stage) {
  fs::create_directories(out);
  const auto started = std::chrono::steady_clock::now();
  const StageResult result = dispatch_stage(cfg, out, stage);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const std::string digest = config_digest(cfg);
  json manifest{{"config_digest", digest}, {"stages", json::object()}};
  const fs::path manifest_path = out / "manifest.json";
  if (fs::exists(manifest_path)) {
    const json existing = load_json_artifact(manifest_path, "any");
    // A different digest means the directory holds another run's artifacts;
    // start the ledger over rather than mixing them.
    if (existing.value("config_digest", std::string()) == digest) manifest = existing;
  }
  manifest["stages"][stage] = json{{"seconds", seconds},
                                   {"artifacts", result.artifacts},
                                   {"warnings", result.warnings}};
  write_json_atomic(manifest, manifest_path);
}

void run_all(const RunConfig& cfg, const fs::path& out) {
  for (const char* stage : {"synth", "encode", "route", "read", "evaluate", "report"})
    run_stage(cfg, out, stage);
}

}  // namespace pwe::pipeline
