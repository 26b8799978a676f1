#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pwe/geometry.hpp"

namespace pwe::env {

// Room frame: x in [-dims.x/2, dims.x/2], y in [-dims.y/2, dims.y/2],
// z in [0, dims.z]. The floor is never coated.
enum class Surface { wall_xlo, wall_xhi, wall_ylo, wall_yhi, ceiling };

const char* surface_name(Surface s);
Surface surface_from_name(const std::string& name);

struct Room {
  geom::Vec3 dims{5.0, 8.0, 3.0};
  std::vector<Surface> coated{Surface::wall_xlo, Surface::wall_xhi, Surface::wall_ylo,
                              Surface::wall_yhi, Surface::ceiling};

  double xlo() const { return -dims.x / 2; }
  double xhi() const { return dims.x / 2; }
  double ylo() const { return -dims.y / 2; }
  double yhi() const { return dims.y / 2; }
  double zlo() const { return 0.0; }
  double zhi() const { return dims.z; }
  bool contains_closed(const geom::Vec3& p) const;
};

struct SdmTile {
  int id = 0;
  geom::Vec3 center;
  geom::Vec3 normal;  // unit, pointing into the room
  double side = 0.0;
  Surface surface = Surface::wall_xlo;
};

struct Transmitter {
  int id = 0;
  geom::Vec3 position;
  double frequency_hz = 5e9;
};

struct ReceiverArraySpec {
  geom::Vec3 center{0.0, -4.0, 1.5};
  int rows = 10;
  int cols = 10;
  double spacing_m = 0.0;  // 0 means half the carrier wavelength
};

struct ScatterSpec {
  enum class Mode { explicit_tiles, specular };
  Mode mode = Mode::specular;
  std::vector<int> tile_ids;               // explicit mode
  geom::Vec3 centroid;                     // specular mode: scatter origin
  std::vector<geom::Vec3> facet_normals;   // specular mode
};

// Regular tile grid on one coated surface; supports O(1) point-to-tile
// lookup for the specular entry-tile search.
struct SurfaceGrid {
  Surface surface;
  int first_tile_id = 0;
  int count_u = 0;
  int count_v = 0;
  double origin_u = 0.0;  // lower corner of the inscribed grid, in-plane coords
  double origin_v = 0.0;
  double side = 0.0;
};

// Truncates to the largest inscribed grid when the tile side does not divide
// a surface dimension; the truncation is reported through `warnings`.
std::vector<SdmTile> tile_surfaces(const Room& room, double side,
                                   std::vector<SurfaceGrid>* grids = nullptr,
                                   std::vector<std::string>* warnings = nullptr);

struct Environment {
  Room room;
  std::vector<SdmTile> tiles;
  std::vector<SurfaceGrid> grids;
  std::vector<Transmitter> transmitters;
  ReceiverArraySpec receiver;
  std::vector<geom::Vec3> antenna_positions;  // row-major over the array grid
  std::vector<geom::Aabb> occluders;
  ScatterSpec scatter;
  double theta_max_deg = 60.0;   // steering cone half-angle about the tile normal
  double grid_step_deg = 2.0;    // steering quantization step
  std::vector<std::string> warnings;
};

// Assembles tiles and antenna positions and validates geometry.
Environment make_environment(const Room& room, double tile_side,
                             std::vector<Transmitter> transmitters,
                             const ReceiverArraySpec& receiver,
                             std::vector<geom::Aabb> occluders, ScatterSpec scatter,
                             double theta_max_deg, double grid_step_deg);

// True iff the open segment (p,q) hits no occluder box and does not cross a
// coated surface plane at an interior point.
bool line_of_sight(const geom::Vec3& p, const geom::Vec3& q,
                   const std::vector<geom::Aabb>& occluders, const Room& room);

// Codebook feasibility: the departure direction from the tile toward the
// target, quantized to the steering grid, must lie within the cone of
// half-angle theta_max about the tile normal.
bool codebook_feasible(const SdmTile& tile, const geom::Vec3& target, double theta_max_deg,
                       double grid_step_deg);

enum class VertexKind { tile, transmitter, antenna };

// Routing graph over tiles, transmitters, and receiver antennas. Vertex ids
// are assigned tiles first, then transmitters, then antennas. Adjacency is
// evaluated on demand from the geometry, so the same scene always yields the
// same edges without materializing the (potentially huge) edge set. An edge
// (u, v) exists iff line_of_sight holds, u is not an antenna, v is not a
// transmitter, and tile departures additionally pass codebook_feasible.
class PWEGraph {
 public:
  explicit PWEGraph(const Environment& env);

  const Environment& environment() const { return *env_; }
  int vertex_count() const { return total_; }
  int tile_count() const { return static_cast<int>(env_->tiles.size()); }
  VertexKind kind(int v) const;
  geom::Vec3 position(int v) const;
  int transmitter_vertex(int tx_index) const { return tile_count() + tx_index; }
  int antenna_vertex(int antenna_index) const {
    return tile_count() + static_cast<int>(env_->transmitters.size()) + antenna_index;
  }
  int antenna_count() const { return static_cast<int>(env_->antenna_positions.size()); }

  bool has_edge(int from, int to) const;
  // Ascending vertex ids; order is part of the determinism contract.
  std::vector<int> neighbors(int from) const;
  // Explicit enumeration for small scenes and oracles.
  std::vector<std::pair<int, int>> all_edges() const;

  double edge_length(int from, int to) const;
  // Direction of arrival at `to` (unit vector from `to` back toward `from`),
  // as global azimuth/elevation.
  geom::AzEl arrival_direction(int from, int to) const;

  // Antennas with no incident tile edge; diagnostic, not an error.
  std::vector<int> disconnected_antennas() const;

 private:
  const Environment* env_;
  int total_ = 0;
};

PWEGraph build_graph(const Environment& env);

// Entry tiles for the routing stage. Explicit mode returns the listed tiles;
// specular mode reflects the transmitter->centroid ray about each facet
// normal and takes the first coated tile hit by each reflected ray.
// Result is deduplicated and sorted by tile id.
std::vector<SdmTile> entry_tiles(const Environment& env, const ScatterSpec& scatter,
                                 const Transmitter& tx);

// First boundary hit of the ray origin + t*dir (t > 0). Returns the surface
// only when it is coated and the hit lands on a tile; used by entry_tiles
// and exposed for its oracle test.
std::optional<int> first_tile_hit(const Environment& env, const geom::Vec3& origin,
                                  const geom::Vec3& dir);

}  // namespace pwe::env
