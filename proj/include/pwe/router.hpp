#pragma once

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwe/angle_codec.hpp"
#include "pwe/common.hpp"
#include "pwe/environment.hpp"
#include "pwe/geometry.hpp"

namespace pwe::route {

struct RoutingError : Error {
  using Error::Error;
};

// Node sequence is entry tile ... final tile, antenna (graph vertex ids).
// Every non-terminal node is a reflecting tile.
struct Route {
  int antenna_index = -1;
  std::vector<int> nodes;
  std::vector<double> hop_lengths;  // nodes.size()-1 entries, meters
  geom::AzEl achieved;              // quantized arrival direction at the antenna
  double angular_error_deg = 0.0;   // great-circle error vs. the requested target

  int hop_count() const { return static_cast<int>(hop_lengths.size()); }
  double total_length() const;
  int reflection_count() const { return static_cast<int>(nodes.size()) - 1; }
};

struct PropagationResult {
  double path_loss_db = 0.0;
  double phase_rad = 0.0;  // wrapped to [0, 2*pi)
};

struct FinalTileChoice {
  int tile_id = -1;
  geom::AzEl achieved;
  double error_deg = 0.0;
};

// Per-antenna incident tile candidates with their quantized arrival
// directions, built lazily; lets repeated target queries against the same
// graph skip the O(tiles) visibility scan.
class CandidateCache {
 public:
  explicit CandidateCache(const env::PWEGraph& graph) : graph_(&graph) {}

  struct Candidate {
    int tile_id;
    geom::AzEl quantized;
    geom::Vec3 unit;  // unit vector of the quantized direction
  };

  const std::vector<Candidate>& for_antenna(int antenna_index);
  const env::PWEGraph& graph() const { return *graph_; }

 private:
  const env::PWEGraph* graph_;
  std::map<int, std::vector<Candidate>> built_;
};

// Minimal-hop labels from a fixed entry set over the tile subgraph, with
// (total length, lexicographic node sequence) tie-breaking inside each hop
// layer. Layers materialize on demand, so big scenes only pay for the depth
// they actually use.
class LayeredPaths {
 public:
  LayeredPaths(const env::PWEGraph& graph, std::vector<int> entry_tile_ids);

  struct Label {
    int hops;
    double length;
    std::vector<int> path;  // entry tile ... this tile
  };

  // nullptr when the tile is unreachable from the entry set.
  const Label* label_for(int tile_id);
  const std::vector<int>& entry_tiles() const { return entries_; }

 private:
  bool better(double len_a, const std::vector<int>& path_a, double len_b,
              const std::vector<int>& path_b) const;
  bool probe_layer(int tile_id, int layer);
  void materialize_layer(int layer);

  const env::PWEGraph* graph_;
  std::vector<int> entries_;
  std::map<int, Label> labels_;
  std::vector<std::vector<int>> layers_;  // fully materialized layers only
  bool exhausted_ = false;
};

FinalTileChoice select_final_tile(const env::PWEGraph& graph, int antenna_index,
                                  const geom::AzEl& target, CandidateCache* cache = nullptr);

Route route_one(const env::PWEGraph& graph, std::span<const int> entry_tile_ids,
                int antenna_index, const geom::AzEl& target, CandidateCache* cache = nullptr,
                LayeredPaths* shared_paths = nullptr);

struct RouteFailure {
  std::string message;
  geom::AzEl best_achieved;
  double best_error_deg = std::numeric_limits<double>::infinity();
};

struct RouteOutcome {
  int antenna_index = -1;
  std::optional<Route> route;
  std::optional<RouteFailure> failure;
  bool ok() const { return route.has_value(); }
};

// One outcome per antenna, in antenna order; per-antenna failures are
// recorded, but if every antenna fails the batch throws. The optional cache
// and shared paths let a caller amortize candidate scans and layer expansion
// across many target sets on the same graph and entry set.
std::vector<RouteOutcome> route_all(const env::PWEGraph& graph,
                                    std::span<const int> entry_tile_ids,
                                    const codec::DirectionalTargets& targets,
                                    CandidateCache* cache = nullptr,
                                    LayeredPaths* shared_paths = nullptr);

// Free-space segment losses plus a fixed per-reflection penalty, and the
// wrapped electrical phase of the total path length.
PropagationResult propagate(const Route& route, double frequency_hz,
                            double reflection_loss_db = 3.0);

}  // namespace pwe::route
