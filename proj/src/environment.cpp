#include "pwe/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "pwe/common.hpp"

namespace pwe::env {
namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kTol = 1e-9;

struct SurfaceFrame {
  Surface surface;
  int const_axis;      // world axis held constant on the surface
  double const_value;  // coordinate on that axis
  geom::Vec3 normal;   // into the room
  int u_axis;
  int v_axis;
  double u_lo, u_hi;
  double v_lo, v_hi;
};

SurfaceFrame frame_for(const Room& room, Surface s) {
  switch (s) {
    case Surface::wall_xlo:
      return {s, 0, room.xlo(), {1, 0, 0}, 1, 2, room.ylo(), room.yhi(), room.zlo(), room.zhi()};
    case Surface::wall_xhi:
      return {s, 0, room.xhi(), {-1, 0, 0}, 1, 2, room.ylo(), room.yhi(), room.zlo(), room.zhi()};
    case Surface::wall_ylo:
      return {s, 1, room.ylo(), {0, 1, 0}, 0, 2, room.xlo(), room.xhi(), room.zlo(), room.zhi()};
    case Surface::wall_yhi:
      return {s, 1, room.yhi(), {0, -1, 0}, 0, 2, room.xlo(), room.xhi(), room.zlo(), room.zhi()};
    case Surface::ceiling:
      return {s, 2, room.zhi(), {0, 0, -1}, 0, 1, room.xlo(), room.xhi(), room.ylo(), room.yhi()};
  }
  throw Error("unknown surface");
}

double component(const geom::Vec3& p, int axis) {
  switch (axis) {
    case 0: return p.x;
    case 1: return p.y;
    default: return p.z;
  }
}

geom::Vec3 with_components(int const_axis, double const_value, int u_axis, double u, int v_axis,
                           double v) {
  geom::Vec3 p{0, 0, 0};
  double* slots[3] = {&p.x, &p.y, &p.z};
  *slots[const_axis] = const_value;
  *slots[u_axis] = u;
  *slots[v_axis] = v;
  return p;
}

std::vector<Surface> sorted_coated(const Room& room) {
  std::set<Surface> uniq(room.coated.begin(), room.coated.end());
  return {uniq.begin(), uniq.end()};
}

}  // namespace

const char* surface_name(Surface s) {
  switch (s) {
    case Surface::wall_xlo: return "wall_xlo";
    case Surface::wall_xhi: return "wall_xhi";
    case Surface::wall_ylo: return "wall_ylo";
    case Surface::wall_yhi: return "wall_yhi";
    case Surface::ceiling: return "ceiling";
  }
  return "?";
}

Surface surface_from_name(const std::string& name) {
  if (name == "wall_xlo") return Surface::wall_xlo;
  if (name == "wall_xhi") return Surface::wall_xhi;
  if (name == "wall_ylo") return Surface::wall_ylo;
  if (name == "wall_yhi") return Surface::wall_yhi;
  if (name == "ceiling") return Surface::ceiling;
  throw ConfigError("unknown surface: " + name);
}

bool Room::contains_closed(const geom::Vec3& p) const {
  return p.x >= xlo() - kTol && p.x <= xhi() + kTol && p.y >= ylo() - kTol &&
         p.y <= yhi() + kTol && p.z >= zlo() - kTol && p.z <= zhi() + kTol;
}

std::vector<SdmTile> tile_surfaces(const Room& room, double side, std::vector<SurfaceGrid>* grids,
                                   std::vector<std::string>* warnings) {
  if (!(side > 0.0)) throw ConfigError("tile side must be positive");
  if (!(room.dims.x > 0 && room.dims.y > 0 && room.dims.z > 0))
    throw ConfigError("room dimensions must be positive");

  std::vector<SdmTile> tiles;
  int next_id = 0;
  for (Surface s : sorted_coated(room)) {
    SurfaceFrame f = frame_for(room, s);
    const double extent_u = f.u_hi - f.u_lo;
    const double extent_v = f.v_hi - f.v_lo;
    const int count_u = static_cast<int>(std::floor(extent_u / side + kTol));
    const int count_v = static_cast<int>(std::floor(extent_v / side + kTol));

    SurfaceGrid grid{};
    grid.surface = s;
    grid.first_tile_id = next_id;
    grid.count_u = std::max(count_u, 0);
    grid.count_v = std::max(count_v, 0);
    grid.side = side;
    grid.origin_u = f.u_lo + (extent_u - grid.count_u * side) / 2;
    grid.origin_v = f.v_lo + (extent_v - grid.count_v * side) / 2;

    const bool truncated_u = std::abs(extent_u - grid.count_u * side) > kTol;
    const bool truncated_v = std::abs(extent_v - grid.count_v * side) > kTol;
    if (warnings && (truncated_u || truncated_v || grid.count_u == 0 || grid.count_v == 0)) {
      std::ostringstream os;
      os << "surface " << surface_name(s) << ": tile side " << side
         << " does not divide the surface; using inscribed " << grid.count_u << "x" << grid.count_v
         << " grid";
      warnings->push_back(os.str());
    }

    for (int iv = 0; iv < grid.count_v; ++iv) {
      for (int iu = 0; iu < grid.count_u; ++iu) {
        SdmTile t;
        t.id = next_id++;
        t.side = side;
        t.surface = s;
        t.normal = f.normal;
        t.center = with_components(f.const_axis, f.const_value, f.u_axis,
                                   grid.origin_u + (iu + 0.5) * side, f.v_axis,
                                   grid.origin_v + (iv + 0.5) * side);
        tiles.push_back(t);
      }
    }
    if (grids) grids->push_back(grid);
  }
  return tiles;
}

Environment make_environment(const Room& room, double tile_side,
                             std::vector<Transmitter> transmitters,
                             const ReceiverArraySpec& receiver, std::vector<geom::Aabb> occluders,
                             ScatterSpec scatter, double theta_max_deg, double grid_step_deg) {
  if (!(theta_max_deg > 0.0 && theta_max_deg < 90.0))
    throw ConfigError("steering cone half-angle must lie in (0, 90) degrees");
  if (!(grid_step_deg > 0.0 && grid_step_deg <= theta_max_deg))
    throw ConfigError("steering grid step must lie in (0, theta_max]");
  if (transmitters.empty()) throw ConfigError("at least one transmitter is required");
  if (receiver.rows < 1 || receiver.cols < 1)
    throw ConfigError("receiver array needs at least one row and one column");

  Environment e;
  e.room = room;
  e.tiles = tile_surfaces(room, tile_side, &e.grids, &e.warnings);
  if (e.tiles.empty()) throw ConfigError("no tiles fit on the coated surfaces");
  e.transmitters = std::move(transmitters);
  e.receiver = receiver;
  e.occluders = std::move(occluders);
  e.scatter = std::move(scatter);
  e.theta_max_deg = theta_max_deg;
  e.grid_step_deg = grid_step_deg;

  for (std::size_t i = 0; i < e.transmitters.size(); ++i) {
    const auto& tx = e.transmitters[i];
    if (!(tx.frequency_hz > 0)) throw ConfigError("transmitter frequency must be positive");
    if (!room.contains_closed(tx.position)) {
      std::ostringstream os;
      os << "transmitter " << tx.id << " lies outside the room";
      throw ConfigError(os.str());
    }
  }
  for (const auto& box : e.occluders) {
    if (!(box.lo.x < box.hi.x && box.lo.y < box.hi.y && box.lo.z < box.hi.z))
      throw ConfigError("occluder box must have positive extent on every axis");
  }

  double spacing = receiver.spacing_m;
  if (spacing <= 0.0) {
    spacing = kSpeedOfLight / e.transmitters.front().frequency_hz / 2.0;
  }
  // Array lies in the x-z plane (boresight +y); index = row*cols + col.
  for (int row = 0; row < receiver.rows; ++row) {
    for (int col = 0; col < receiver.cols; ++col) {
      geom::Vec3 p = receiver.center;
      p.x += (col - (receiver.cols - 1) / 2.0) * spacing;
      p.z += (row - (receiver.rows - 1) / 2.0) * spacing;
      if (!room.contains_closed(p)) throw ConfigError("receiver antenna lies outside the room");
      e.antenna_positions.push_back(p);
    }
  }
  return e;
}

bool line_of_sight(const geom::Vec3& p, const geom::Vec3& q,
                   const std::vector<geom::Aabb>& occluders, const Room& room) {
  if (geom::norm(q - p) < 1e-12) throw Error("line of sight requires distinct endpoints");
  for (const auto& box : occluders) {
    if (geom::segment_hits_box_interior(p, q, box)) return false;
  }
  // A coated plane blocks only when crossed at a point interior to the
  // segment; endpoints resting on a plane (tile centers) do not block.
  for (Surface s : sorted_coated(room)) {
    SurfaceFrame f = frame_for(room, s);
    const double sp = component(p, f.const_axis) - f.const_value;
    const double sq = component(q, f.const_axis) - f.const_value;
    if (!(sp * sq < 0.0)) continue;
    const double t = sp / (sp - sq);
    if (!(t > 0.0 && t < 1.0)) continue;
    const geom::Vec3 hit = p + (q - p) * t;
    const double u = component(hit, f.u_axis);
    const double v = component(hit, f.v_axis);
    if (u >= f.u_lo - kTol && u <= f.u_hi + kTol && v >= f.v_lo - kTol && v <= f.v_hi + kTol)
      return false;
  }
  return true;
}

bool codebook_feasible(const SdmTile& tile, const geom::Vec3& target, double theta_max_deg,
                       double grid_step_deg) {
  const geom::Vec3 d = target - tile.center;
  const double len = geom::norm(d);
  if (len < 1e-12) return false;
  const double c = std::clamp(geom::dot(d, tile.normal) / len, -1.0, 1.0);
  const double theta_deg = std::acos(c) * geom::kDegPerRad;
  const double quantized = geom::quantize_deg(theta_deg, grid_step_deg);
  return quantized <= theta_max_deg + kTol;
}

PWEGraph::PWEGraph(const Environment& env) : env_(&env) {
  total_ = static_cast<int>(env.tiles.size() + env.transmitters.size() +
                            env.antenna_positions.size());
}

VertexKind PWEGraph::kind(int v) const {
  if (v < 0 || v >= total_) throw DimensionError("graph vertex id out of range");
  if (v < tile_count()) return VertexKind::tile;
  if (v < tile_count() + static_cast<int>(env_->transmitters.size()))
    return VertexKind::transmitter;
  return VertexKind::antenna;
}

geom::Vec3 PWEGraph::position(int v) const {
  switch (kind(v)) {
    case VertexKind::tile: return env_->tiles[v].center;
    case VertexKind::transmitter: return env_->transmitters[v - tile_count()].position;
    case VertexKind::antenna:
      return env_->antenna_positions[static_cast<std::size_t>(
          v - tile_count() - static_cast<int>(env_->transmitters.size()))];
  }
  throw Error("unreachable");
}

bool PWEGraph::has_edge(int from, int to) const {
  const VertexKind kf = kind(from);
  const VertexKind kt = kind(to);
  if (from == to) return false;
  if (kf == VertexKind::antenna) return false;
  if (kt == VertexKind::transmitter) return false;
  const geom::Vec3 a = position(from);
  const geom::Vec3 b = position(to);
  if (geom::norm(b - a) < 1e-12) return false;
  if (!line_of_sight(a, b, env_->occluders, env_->room)) return false;
  if (kf == VertexKind::tile &&
      !codebook_feasible(env_->tiles[from], b, env_->theta_max_deg, env_->grid_step_deg))
    return false;
  return true;
}

std::vector<int> PWEGraph::neighbors(int from) const {
  std::vector<int> out;
  for (int v = 0; v < total_; ++v) {
    if (has_edge(from, v)) out.push_back(v);
  }
  return out;
}

std::vector<std::pair<int, int>> PWEGraph::all_edges() const {
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < total_; ++u) {
    for (int v = 0; v < total_; ++v) {
      if (has_edge(u, v)) edges.emplace_back(u, v);
    }
  }
  return edges;
}

double PWEGraph::edge_length(int from, int to) const {
  return geom::norm(position(to) - position(from));
}

geom::AzEl PWEGraph::arrival_direction(int from, int to) const {
  const geom::Vec3 back = geom::normalized(position(from) - position(to));
  return geom::direction_to_azel(back);
}

std::vector<int> PWEGraph::disconnected_antennas() const {
  std::vector<int> out;
  for (int a = 0; a < antenna_count(); ++a) {
    const int v = antenna_vertex(a);
    bool reached = false;
    for (int t = 0; t < tile_count() && !reached; ++t) reached = has_edge(t, v);
    if (!reached) out.push_back(a);
  }
  return out;
}

PWEGraph build_graph(const Environment& env) { return PWEGraph(env); }

std::optional<int> first_tile_hit(const Environment& env, const geom::Vec3& origin,
                                  const geom::Vec3& dir) {
  if (geom::norm(dir) < 1e-12) throw Error("ray direction must be nonzero");
  const double lo[3] = {env.room.xlo(), env.room.ylo(), env.room.zlo()};
  const double hi[3] = {env.room.xhi(), env.room.yhi(), env.room.zhi()};
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};

  double best_t = std::numeric_limits<double>::infinity();
  int best_axis = -1;
  bool best_toward_hi = false;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) continue;
    const bool toward_hi = d[k] > 0;
    const double plane = toward_hi ? hi[k] : lo[k];
    const double t = (plane - o[k]) / d[k];
    if (t > 1e-9 && t < best_t) {
      best_t = t;
      best_axis = k;
      best_toward_hi = toward_hi;
    }
  }
  if (best_axis < 0) return std::nullopt;

  Surface s;
  if (best_axis == 0)
    s = best_toward_hi ? Surface::wall_xhi : Surface::wall_xlo;
  else if (best_axis == 1)
    s = best_toward_hi ? Surface::wall_yhi : Surface::wall_ylo;
  else if (best_toward_hi)
    s = Surface::ceiling;
  else
    return std::nullopt;  // floor is never coated

  const auto grid_it = std::find_if(env.grids.begin(), env.grids.end(),
                                    [s](const SurfaceGrid& g) { return g.surface == s; });
  if (grid_it == env.grids.end()) return std::nullopt;

  const geom::Vec3 hit = origin + dir * best_t;
  SurfaceFrame f = frame_for(env.room, s);
  const double u = component(hit, f.u_axis);
  const double v = component(hit, f.v_axis);
  const int iu = static_cast<int>(std::floor((u - grid_it->origin_u) / grid_it->side));
  const int iv = static_cast<int>(std::floor((v - grid_it->origin_v) / grid_it->side));
  if (iu < 0 || iu >= grid_it->count_u || iv < 0 || iv >= grid_it->count_v) return std::nullopt;
  return grid_it->first_tile_id + iv * grid_it->count_u + iu;
}

std::vector<SdmTile> entry_tiles(const Environment& env, const ScatterSpec& scatter,
                                 const Transmitter& tx) {
  std::set<int> ids;
  if (scatter.mode == ScatterSpec::Mode::explicit_tiles) {
    for (int id : scatter.tile_ids) {
      if (id < 0 || id >= static_cast<int>(env.tiles.size())) {
        std::ostringstream os;
        os << "scatter tile id " << id << " does not exist (have " << env.tiles.size()
           << " tiles)";
        throw ConfigError(os.str());
      }
      ids.insert(id);
    }
  } else {
    if (!env.room.contains_closed(scatter.centroid))
      throw ConfigError("scatter centroid lies outside the room");
    const geom::Vec3 incident = scatter.centroid - tx.position;
    if (geom::norm(incident) < 1e-12)
      throw ConfigError("scatter centroid coincides with the transmitter");
    if (scatter.facet_normals.empty())
      throw ConfigError("specular scatter requires at least one facet normal");
    const geom::Vec3 d = geom::normalized(incident);
    for (const auto& raw_n : scatter.facet_normals) {
      if (geom::norm(raw_n) < 1e-12) throw ConfigError("facet normal must be nonzero");
      const geom::Vec3 n = geom::normalized(raw_n);
      const geom::Vec3 r = d - n * (2.0 * geom::dot(d, n));
      if (auto id = first_tile_hit(env, scatter.centroid, r)) ids.insert(*id);
    }
  }
  std::vector<SdmTile> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(env.tiles[id]);
  return out;
}

}  // namespace pwe::env
