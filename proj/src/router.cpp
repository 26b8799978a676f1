#include "pwe/router.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace pwe::route {
namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kTwoPi = 6.283185307179586476925286766559;

geom::AzEl quantize_azel(const geom::AzEl& a, double step_deg) {
  return {geom::quantize_deg(a.az_deg, step_deg), geom::quantize_deg(a.el_deg, step_deg)};
}

std::vector<int> sorted_unique(std::span<const int> ids) {
  std::set<int> s(ids.begin(), ids.end());
  return {s.begin(), s.end()};
}

}  // namespace

double Route::total_length() const {
  return std::accumulate(hop_lengths.begin(), hop_lengths.end(), 0.0);
}

const std::vector<CandidateCache::Candidate>& CandidateCache::for_antenna(int antenna_index) {
  auto it = built_.find(antenna_index);
  if (it != built_.end()) return it->second;
  if (antenna_index < 0 || antenna_index >= graph_->antenna_count())
    throw DimensionError("antenna index out of range");

  const double step = graph_->environment().grid_step_deg;
  const int av = graph_->antenna_vertex(antenna_index);
  std::vector<Candidate> list;
  for (int t = 0; t < graph_->tile_count(); ++t) {
    if (!graph_->has_edge(t, av)) continue;
    Candidate c;
    c.tile_id = t;
    c.quantized = quantize_azel(graph_->arrival_direction(t, av), step);
    c.unit = geom::azel_to_direction(c.quantized);
    list.push_back(c);
  }
  return built_.emplace(antenna_index, std::move(list)).first->second;
}

LayeredPaths::LayeredPaths(const env::PWEGraph& graph, std::vector<int> entry_tile_ids)
    : graph_(&graph) {
  std::set<int> uniq(entry_tile_ids.begin(), entry_tile_ids.end());
  entries_.assign(uniq.begin(), uniq.end());
  for (int id : entries_) {
    if (id < 0 || id >= graph_->tile_count())
      throw DimensionError("entry tile id out of range");
    labels_.emplace(id, Label{0, 0.0, {id}});
  }
  layers_.push_back(entries_);
}

bool LayeredPaths::better(double len_a, const std::vector<int>& path_a, double len_b,
                          const std::vector<int>& path_b) const {
  if (len_a != len_b) return len_a < len_b;
  return path_a < path_b;
}

// Exact when layers 0..layer-1 are complete and tile_id is unlabeled:
// a minimal-hop path reaches every vertex at its own breadth-first depth,
// so only predecessors in the previous layer matter.
bool LayeredPaths::probe_layer(int tile_id, int layer) {
  const Label* best = nullptr;
  double best_len = 0.0;
  for (int u : layers_[static_cast<std::size_t>(layer) - 1]) {
    if (!graph_->has_edge(u, tile_id)) continue;
    const Label& lu = labels_.at(u);
    const double len = lu.length + graph_->edge_length(u, tile_id);
    if (!best || better(len, lu.path, best_len, best->path)) {
      best = &lu;
      best_len = len;
    }
  }
  if (!best) return false;
  Label lab{layer, best_len, best->path};
  lab.path.push_back(tile_id);
  labels_.emplace(tile_id, std::move(lab));
  return true;
}

void LayeredPaths::materialize_layer(int layer) {
  while (static_cast<int>(layers_.size()) <= layer) {
    const auto& prev = layers_.back();
    std::vector<int> next;
    for (int v = 0; v < graph_->tile_count(); ++v) {
      if (labels_.count(v)) continue;
      if (probe_layer(v, static_cast<int>(layers_.size()))) next.push_back(v);
    }
    if (next.empty()) {
      exhausted_ = true;
      return;
    }
    layers_.push_back(std::move(next));
  }
}

const LayeredPaths::Label* LayeredPaths::label_for(int tile_id) {
  if (tile_id < 0 || tile_id >= graph_->tile_count())
    throw DimensionError("tile id out of range");
  auto it = labels_.find(tile_id);
  if (it != labels_.end()) return &it->second;
  // Try a targeted probe one layer past the materialized frontier before
  // paying for a full expansion; almost every query resolves at depth 1.
  while (!exhausted_) {
    const int next_layer = static_cast<int>(layers_.size());
    if (probe_layer(tile_id, next_layer)) return &labels_.at(tile_id);
    materialize_layer(next_layer);
    auto again = labels_.find(tile_id);
    if (again != labels_.end()) return &again->second;
  }
  return nullptr;
}

FinalTileChoice select_final_tile(const env::PWEGraph& graph, int antenna_index,
                                  const geom::AzEl& target, CandidateCache* cache) {
  CandidateCache local(graph);
  CandidateCache& cc = cache ? *cache : local;
  const auto& candidates = cc.for_antenna(antenna_index);
  if (candidates.empty()) {
    std::ostringstream os;
    os << "antenna " << antenna_index << " has no incident tile edge";
    throw RoutingError(os.str());
  }

  const geom::Vec3 want = geom::azel_to_direction(target);
  const CandidateCache::Candidate* best = nullptr;
  double best_err = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    const double err = geom::angular_distance_deg(c.unit, want);
    if (err < best_err) {
      best_err = err;
      best = &c;
    }
  }
  const double q = graph.environment().grid_step_deg;
  if (best_err > q + 1e-9) {
    std::ostringstream os;
    os << "unreachable DoA for antenna " << antenna_index << ": best achievable error "
       << best_err << " deg exceeds grid step " << q << " deg";
    throw RoutingError(os.str());
  }
  return {best->tile_id, best->quantized, best_err};
}

Route route_one(const env::PWEGraph& graph, std::span<const int> entry_tile_ids,
                int antenna_index, const geom::AzEl& target, CandidateCache* cache,
                LayeredPaths* shared_paths) {
  if (entry_tile_ids.empty()) throw RoutingError("entry tile set is empty");
  const FinalTileChoice final = select_final_tile(graph, antenna_index, target, cache);

  LayeredPaths local(graph, sorted_unique(entry_tile_ids));
  LayeredPaths& paths = shared_paths ? *shared_paths : local;
  const LayeredPaths::Label* label = paths.label_for(final.tile_id);
  if (!label) {
    std::ostringstream os;
    os << "final tile " << final.tile_id << " is disconnected from entry tiles {";
    for (std::size_t i = 0; i < paths.entry_tiles().size(); ++i) {
      if (i) os << ", ";
      os << paths.entry_tiles()[i];
    }
    os << "}";
    throw RoutingError(os.str());
  }

  Route r;
  r.antenna_index = antenna_index;
  r.nodes = label->path;
  r.nodes.push_back(graph.antenna_vertex(antenna_index));
  r.hop_lengths.reserve(r.nodes.size() - 1);
  for (std::size_t i = 0; i + 1 < r.nodes.size(); ++i)
    r.hop_lengths.push_back(graph.edge_length(r.nodes[i], r.nodes[i + 1]));
  r.achieved = final.achieved;
  r.angular_error_deg = final.error_deg;
  return r;
}

std::vector<RouteOutcome> route_all(const env::PWEGraph& graph,
                                    std::span<const int> entry_tile_ids,
                                    const codec::DirectionalTargets& targets,
                                    CandidateCache* cache, LayeredPaths* shared_paths) {
  if (targets.azimuth_deg.size() != targets.elevation_deg.size())
    throw DimensionError("azimuth and elevation target lists differ in length");
  const int m = static_cast<int>(targets.azimuth_deg.size());
  if (m != graph.antenna_count())
    throw DimensionError("one DoA target per antenna is required");
  if (entry_tile_ids.empty()) throw RoutingError("entry tile set is empty");

  CandidateCache local_cache(graph);
  CandidateCache& cc = cache ? *cache : local_cache;
  LayeredPaths local_paths(graph, sorted_unique(entry_tile_ids));
  LayeredPaths& paths = shared_paths ? *shared_paths : local_paths;

  std::vector<RouteOutcome> out(static_cast<std::size_t>(m));
  int successes = 0;
  for (int a = 0; a < m; ++a) {
    RouteOutcome& o = out[static_cast<std::size_t>(a)];
    o.antenna_index = a;
    const geom::AzEl target{targets.azimuth_deg[static_cast<std::size_t>(a)],
                            targets.elevation_deg[static_cast<std::size_t>(a)]};
    try {
      o.route = route_one(graph, entry_tile_ids, a, target, &cc, &paths);
      ++successes;
    } catch (const RoutingError& e) {
      RouteFailure f;
      f.message = e.what();
      // Best-effort achieved direction so a reading can still be assembled.
      const auto& candidates = cc.for_antenna(a);
      const geom::Vec3 want = geom::azel_to_direction(target);
      for (const auto& c : candidates) {
        const double err = geom::angular_distance_deg(c.unit, want);
        if (err < f.best_error_deg) {
          f.best_error_deg = err;
          f.best_achieved = c.quantized;
        }
      }
      if (candidates.empty()) f.best_achieved = target;
      o.failure = std::move(f);
    }
  }
  if (successes == 0) throw RoutingError("routing failed for every antenna");
  return out;
}

PropagationResult propagate(const Route& route, double frequency_hz,
                            double reflection_loss_db) {
  if (!(frequency_hz > 0)) throw Error("frequency must be positive");
  if (route.hop_lengths.empty()) throw Error("route has no hops");
  const double lambda = kSpeedOfLight / frequency_hz;

  PropagationResult pr;
  double total = 0.0;
  for (double len : route.hop_lengths) {
    if (!(len > 0)) throw Error("route contains a zero-length segment");
    pr.path_loss_db += 20.0 * std::log10(4.0 * geom::kPi * len / lambda);
    total += len;
  }
  pr.path_loss_db += reflection_loss_db * route.reflection_count();
  pr.phase_rad = std::fmod(kTwoPi * total / lambda, kTwoPi);
  return pr;
}

}  // namespace pwe::route
