#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pwe::corpus {

// Grayscale image with intensities in [0,1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  int object_id = 0;
  int pose_id = 0;

  double at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t pixel_count() const { return pixels.size(); }
};

// Row-major flattening of a GrayImage, tagged with its source identity.
struct ImageVector {
  std::vector<double> values;
  int object_id = 0;
  int pose_id = 0;
};

class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  explicit CorrelationMatrix(int n) : n_(n), entries_(static_cast<std::size_t>(n) * n, 0.0) {}

  int size() const { return n_; }
  double at(int i, int j) const { return entries_[static_cast<std::size_t>(i) * n_ + j]; }
  double& at(int i, int j) { return entries_[static_cast<std::size_t>(i) * n_ + j]; }
  const std::vector<double>& entries() const { return entries_; }

 private:
  int n_ = 0;
  std::vector<double> entries_;
};

// Silhouette-based corpus synthesis. Morph objects are inserted between
// consecutive base shapes; each object gets `rotations` planar poses with
// seed-derived angles (pose 0 is unrotated).
struct SynthSpec {
  std::vector<std::string> shapes;
  int rotations = 1;
  int morph_steps = 0;
  int width = 64;
  int height = 64;
};

std::vector<std::string> known_shapes();

// Binary silhouette of `shape` rotated by `rotation_deg` (counterclockwise).
GrayImage render_silhouette(const std::string& shape, double rotation_deg,
                            int width, int height);

// Pixelwise convex combination of the two shapes' coverage masks at morph
// step t in [0,1], thresholded at 0.5. t=0 and t=1 reproduce the base
// silhouettes exactly.
GrayImage render_morph(const std::string& shape_a, const std::string& shape_b,
                       double t, double rotation_deg, int width, int height);

std::vector<GrayImage> synthesize_corpus(const SynthSpec& spec, std::uint64_t seed);

// Directory layout: images/*.pgm plus manifest.json with records
// {file, object_id, pose_id, width, height}, listed in manifest order.
std::vector<GrayImage> load_corpus(const std::filesystem::path& directory);
void save_corpus(const std::vector<GrayImage>& corpus, const std::filesystem::path& directory);

// Binary portable graymap (P5), maxval 255.
GrayImage load_pgm(const std::filesystem::path& file);
void save_pgm(const GrayImage& image, const std::filesystem::path& file);

ImageVector vectorize(const GrayImage& image);

// Pearson correlation coefficient of two equal-length sequences. Throws
// DegenerateVarianceError when either input is constant.
double pearson(std::span<const double> a, std::span<const double> b);

// Pairwise Pearson matrix; each pair is computed once and mirrored, the
// diagonal is exactly 1.
CorrelationMatrix correlation_matrix(const std::vector<ImageVector>& corpus);

}  // namespace pwe::corpus
