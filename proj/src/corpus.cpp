#include "pwe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "pwe/common.hpp"
#include "pwe/geometry.hpp"

#include <nlohmann/json.hpp>

namespace pwe::corpus {
namespace {

using InsideFn = std::function<bool(double, double)>;

bool in_polygon(double x, double y, std::span<const double> xs, std::span<const double> ys) {
  // Even-odd crossing test.
  bool inside = false;
  const std::size_t n = xs.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((ys[i] > y) != (ys[j] > y)) {
      const double t = (y - ys[j]) / (ys[i] - ys[j]);
      if (x < xs[j] + t * (xs[i] - xs[j])) inside = !inside;
    }
  }
  return inside;
}

InsideFn regular_polygon(int sides, double radius, double phase_deg) {
  std::vector<double> xs(sides), ys(sides);
  for (int k = 0; k < sides; ++k) {
    const double a = (phase_deg + 360.0 * k / sides) / geom::kDegPerRad;
    xs[static_cast<std::size_t>(k)] = radius * std::cos(a);
    ys[static_cast<std::size_t>(k)] = radius * std::sin(a);
  }
  return [xs = std::move(xs), ys = std::move(ys)](double x, double y) {
    return in_polygon(x, y, xs, ys);
  };
}

InsideFn star_polygon(int points, double outer, double inner) {
  std::vector<double> xs, ys;
  for (int k = 0; k < 2 * points; ++k) {
    const double r = (k % 2 == 0) ? outer : inner;
    const double a = (90.0 + 180.0 * k / points) / geom::kDegPerRad;
    xs.push_back(r * std::cos(a));
    ys.push_back(r * std::sin(a));
  }
  return [xs = std::move(xs), ys = std::move(ys)](double x, double y) {
    return in_polygon(x, y, xs, ys);
  };
}

const std::map<std::string, InsideFn>& shape_table() {
  static const std::map<std::string, InsideFn> table = {
      {"square", [](double x, double y) { return std::max(std::abs(x), std::abs(y)) <= 0.62; }},
      {"disk", [](double x, double y) { return x * x + y * y <= 0.62 * 0.62; }},
      {"triangle", regular_polygon(3, 0.68, 90.0)},
      {"ellipse", [](double x, double y) {
         const double u = x / 0.72, v = y / 0.40;
         return u * u + v * v <= 1.0;
       }},
      {"ring", [](double x, double y) {
         const double r2 = x * x + y * y;
         return r2 >= 0.34 * 0.34 && r2 <= 0.62 * 0.62;
       }},
      {"cross", [](double x, double y) {
         return (std::abs(x) <= 0.20 && std::abs(y) <= 0.66) ||
                (std::abs(y) <= 0.20 && std::abs(x) <= 0.66);
       }},
      {"star", star_polygon(5, 0.70, 0.29)},
      {"hexagon", regular_polygon(6, 0.62, 0.0)},
      {"bar", [](double x, double y) { return std::abs(x) <= 0.68 && std::abs(y) <= 0.17; }},
      {"lshape", [](double x, double y) {
         return (x >= -0.55 && x <= -0.10 && y >= -0.60 && y <= 0.60) ||
                (x >= -0.55 && x <= 0.60 && y >= -0.60 && y <= -0.15);
       }},
      {"diamond", [](double x, double y) { return std::abs(x) + std::abs(y) <= 0.68; }},
      {"notch", [](double x, double y) {
         const bool base = std::max(std::abs(x), std::abs(y)) <= 0.62;
         const bool bite = x >= 0.17 && y >= 0.17;
         return base && !bite;
       }},
      {"crescent", [](double x, double y) {
         const bool base = x * x + y * y <= 0.62 * 0.62;
         const double dx = x - 0.25;
         const bool cut = dx * dx + y * y <= 0.45 * 0.45;
         return base && !cut;
       }},
      {"tee", [](double x, double y) {
         return (std::abs(x) <= 0.60 && y >= 0.25 && y <= 0.60) ||
                (std::abs(x) <= 0.16 && y >= -0.60 && y <= 0.25);
       }},
  };
  return table;
}

const InsideFn& shape_fn(const std::string& name) {
  const auto& table = shape_table();
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown shape: " + name);
  return it->second;
}

// Fractional pixel coverage via a 4x4 subsample grid; rotation is applied by
// rotating sample coordinates clockwise so the shape turns counterclockwise.
std::vector<double> coverage_mask(const InsideFn& inside, double rotation_deg,
                                  int width, int height) {
  constexpr int kSub = 4;
  const double c = std::cos(-rotation_deg / geom::kDegPerRad);
  const double s = std::sin(-rotation_deg / geom::kDegPerRad);
  std::vector<double> mask(static_cast<std::size_t>(width) * height, 0.0);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      int hits = 0;
      for (int sr = 0; sr < kSub; ++sr) {
        for (int sc = 0; sc < kSub; ++sc) {
          const double px = (col + (sc + 0.5) / kSub) / width * 2.0 - 1.0;
          const double py = 1.0 - (row + (sr + 0.5) / kSub) / height * 2.0;
          const double rx = c * px - s * py;
          const double ry = s * px + c * py;
          if (inside(rx, ry)) ++hits;
        }
      }
      mask[static_cast<std::size_t>(row) * width + col] =
          static_cast<double>(hits) / (kSub * kSub);
    }
  }
  return mask;
}

GrayImage threshold_mask(std::vector<double> mask, int width, int height) {
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    img.pixels[i] = mask[i] >= 0.5 ? 1.0 : 0.0;
  }
  return img;
}

void check_resolution(int width, int height) {
  if (width < 8 || height < 8) {
    throw ConfigError("resolution below 8x8: " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
}

int read_pnm_token(std::istream& in) {
  // PNM headers allow '#' comments between whitespace-separated tokens.
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return value;
}

}  // namespace

std::vector<std::string> known_shapes() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : shape_table()) names.push_back(name);
  return names;
}

GrayImage render_silhouette(const std::string& shape, double rotation_deg,
                            int width, int height) {
  check_resolution(width, height);
  return threshold_mask(coverage_mask(shape_fn(shape), rotation_deg, width, height),
                        width, height);
}

GrayImage render_morph(const std::string& shape_a, const std::string& shape_b,
                       double t, double rotation_deg, int width, int height) {
  check_resolution(width, height);
  if (t < 0.0 || t > 1.0) throw ConfigError("morph step outside [0,1]");
  const auto a = coverage_mask(shape_fn(shape_a), rotation_deg, width, height);
  const auto b = coverage_mask(shape_fn(shape_b), rotation_deg, width, height);
  std::vector<double> blended(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    blended[i] = (1.0 - t) * a[i] + t * b[i];
  }
  return threshold_mask(std::move(blended), width, height);
}

std::vector<GrayImage> synthesize_corpus(const SynthSpec& spec, std::uint64_t seed) {
  check_resolution(spec.width, spec.height);
  if (spec.shapes.empty()) throw ConfigError("no base shapes given");
  if (spec.morph_steps > 0 && spec.shapes.size() < 2) {
    throw ConfigError("morph steps requested with fewer than 2 base shapes");
  }
  if (spec.rotations < 1) throw ConfigError("rotation count must be >= 1");
  for (const auto& name : spec.shapes) shape_fn(name);  // validate names up front

  // Object list: the base shapes, then morph intermediates between each
  // consecutive shape pair.
  struct ObjectDef {
    std::string a, b;
    double t = 0.0;  // 0 means pure shape `a`
  };
  std::vector<ObjectDef> objects;
  for (const auto& name : spec.shapes) objects.push_back({name, name, 0.0});
  for (std::size_t p = 0; p + 1 < spec.shapes.size() && spec.morph_steps > 0; ++p) {
    for (int k = 1; k <= spec.morph_steps; ++k) {
      const double t = static_cast<double>(k) / (spec.morph_steps + 1);
      objects.push_back({spec.shapes[p], spec.shapes[p + 1], t});
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<GrayImage> out;
  for (std::size_t obj = 0; obj < objects.size(); ++obj) {
    std::vector<GrayImage> poses;
    for (int pose = 0; pose < spec.rotations; ++pose) {
      // Rotational symmetry can make two pose angles rasterize identically;
      // redraw so every pose of an object is a distinct image.
      GrayImage img;
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 64)
          throw Error("could not draw a distinct pose for shape '" + objects[obj].a +
                      "'; the shape rasterizes rotation-invariantly, so it supports only "
                      "one pose");
        const double angle = (pose == 0 && attempt == 0) ? 0.0 : uniform01(rng) * 360.0;
        img = objects[obj].t == 0.0
                  ? render_silhouette(objects[obj].a, angle, spec.width, spec.height)
                  : render_morph(objects[obj].a, objects[obj].b, objects[obj].t, angle,
                                 spec.width, spec.height);
        const bool duplicate = std::any_of(poses.begin(), poses.end(), [&](const GrayImage& p) {
          return p.pixels == img.pixels;
        });
        if (!duplicate) break;
      }
      img.object_id = static_cast<int>(obj);
      img.pose_id = pose;
      poses.push_back(std::move(img));
    }
    for (auto& img : poses) out.push_back(std::move(img));
  }
  return out;
}

GrayImage load_pgm(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open image file: " + file.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') {
    throw Error("not a binary grayscale (P5) file: " + file.string());
  }
  const int width = read_pnm_token(in);
  const int height = read_pnm_token(in);
  const int maxval = read_pnm_token(in);
  if (width <= 0 || height <= 0 || maxval <= 0) {
    throw Error("malformed PGM header: " + file.string());
  }
  if (maxval > 255) throw Error("unsupported maxval " + std::to_string(maxval) +
                                " in " + file.string());
  in.get();  // single whitespace byte after maxval
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw Error("truncated PGM data: " + file.string());
  }
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.pixels[i] = static_cast<double>(raw[i]) / maxval;
  }
  return img;
}

void save_pgm(const GrayImage& image, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write image file: " + file.string());
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  for (double p : image.pixels) {
    const double clamped = std::clamp(p, 0.0, 1.0);
    out.put(static_cast<char>(std::lround(clamped * 255.0)));
  }
}

std::vector<GrayImage> load_corpus(const std::filesystem::path& directory) {
  const auto manifest_path = directory / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error("manifest not found: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  std::vector<GrayImage> out;
  std::set<std::pair<int, int>> seen;
  for (const auto& rec : manifest.at("images")) {
    const auto file = directory / rec.at("file").get<std::string>();
    if (!std::filesystem::exists(file)) {
      throw Error("image listed in manifest is absent: " + file.string());
    }
    GrayImage img = load_pgm(file);
    if (rec.contains("width") &&
        (rec.at("width").get<int>() != img.width ||
         rec.at("height").get<int>() != img.height)) {
      throw DimensionError("manifest/file dimension mismatch for " + file.string());
    }
    img.object_id = rec.at("object_id").get<int>();
    img.pose_id = rec.at("pose_id").get<int>();
    if (!seen.insert({img.object_id, img.pose_id}).second) {
      throw Error("duplicate (object_id, pose_id) in manifest: (" +
                  std::to_string(img.object_id) + ", " + std::to_string(img.pose_id) + ")");
    }
    out.push_back(std::move(img));
  }
  return out;
}

void save_corpus(const std::vector<GrayImage>& corpus, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory / "images");
  nlohmann::json records = nlohmann::json::array();
  for (const auto& img : corpus) {
    std::ostringstream name;
    name << "obj" << img.object_id << "_pose" << img.pose_id << ".pgm";
    const std::string rel = "images/" + name.str();
    save_pgm(img, directory / rel);
    records.push_back({{"file", rel},
                       {"object_id", img.object_id},
                       {"pose_id", img.pose_id},
                       {"width", img.width},
                       {"height", img.height}});
  }
  std::ofstream out(directory / "manifest.json");
  out << nlohmann::json{{"images", records}}.dump(2) << "\n";
}

ImageVector vectorize(const GrayImage& image) {
  return {image.pixels, image.object_id, image.pose_id};
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("pearson: length mismatch");
  if (a.size() < 2) throw DimensionError("pearson: need at least 2 samples");
  const std::size_t n = a.size();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mean_a += a[k];
    mean_b += b[k];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double da = a[k] - mean_a;
    const double db = b[k] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    throw DegenerateVarianceError("pearson: constant input sequence");
  }
  return std::clamp(cov / (std::sqrt(var_a) * std::sqrt(var_b)), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const std::vector<ImageVector>& corpus) {
  const int n = static_cast<int>(corpus.size());
  if (n < 2) throw DimensionError("correlation_matrix: need at least 2 images");
  const std::size_t len = corpus[0].values.size();
  for (const auto& v : corpus) {
    if (v.values.size() != len) {
      throw DimensionError("correlation_matrix: image length mismatch at (object " +
                           std::to_string(v.object_id) + ", pose " +
                           std::to_string(v.pose_id) + ")");
    }
  }
  CorrelationMatrix R(n);
  for (int i = 0; i < n; ++i) {
    R.at(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double r;
      try {
        r = pearson(corpus[static_cast<std::size_t>(i)].values,
                    corpus[static_cast<std::size_t>(j)].values);
      } catch (const DegenerateVarianceError&) {
        // Identify which of the pair is the constant one.
        for (int k : {i, j}) {
          const auto& v = corpus[static_cast<std::size_t>(k)].values;
          const double first = v[0];
          if (std::all_of(v.begin(), v.end(), [&](double x) { return x == first; })) {
            throw DegenerateVarianceError(
                "constant image (object " +
                std::to_string(corpus[static_cast<std::size_t>(k)].object_id) + ", pose " +
                std::to_string(corpus[static_cast<std::size_t>(k)].pose_id) + ")");
          }
        }
        throw;
      }
      R.at(i, j) = r;
      R.at(j, i) = r;
    }
  }
  return R;
}

}  // namespace pwe::corpus
