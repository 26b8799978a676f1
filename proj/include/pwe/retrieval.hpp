#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwe/corpus.hpp"

namespace pwe::retrieval {

enum class Metric { ssim, l2, psnr, mutual_information, cosine };

Metric metric_from_name(const std::string& name);
const char* name_of(Metric m);
// True when larger scores rank better (all metrics except L2).
bool higher_is_better(Metric m);

// Stand-in for a learned reconstruction model: either pass the ground truth
// through (optionally distorted), or look the image up by its reading.
struct Channel {
  enum class Kind { identity, distortion, nearest_reading };
  Kind kind = Kind::identity;

  // distortion parameters
  double noise_sigma = 0.0;
  int blur_radius = 0;
  int shift_px = 0;

  // nearest_reading training store
  struct StoredReading {
    std::vector<double> features;
    corpus::GrayImage image;
  };
  std::vector<StoredReading> store;
};

Channel channel_from_name(const std::string& kind);

// identity: ground truth unchanged. distortion: Gaussian noise, box blur,
// then pixel shift, each skipped at its degenerate parameter. nearest_reading:
// the stored image whose features minimize L2 distance to query_features.
// noise_seed drives the distortion noise only.
corpus::GrayImage reconstruct(const Channel& channel,
                              std::span<const double> query_features,
                              const corpus::GrayImage& truth, std::uint64_t noise_seed);

double ssim(const corpus::GrayImage& a, const corpus::GrayImage& b);
double l2(const corpus::GrayImage& a, const corpus::GrayImage& b);
// +infinity for identical images; ranks above every finite score.
double psnr(const corpus::GrayImage& a, const corpus::GrayImage& b);
// 64 equal-width bins over [0,1]; result in bits.
double mutual_information(const corpus::GrayImage& a, const corpus::GrayImage& b);
double cosine(const corpus::GrayImage& a, const corpus::GrayImage& b);

double score(Metric m, const corpus::GrayImage& a, const corpus::GrayImage& b);

enum class MatchClass { correct, angle_mismatch, object_mismatch };
const char* name_of(MatchClass c);

struct MatchResult {
  int query_object = -1;
  int query_pose = -1;
  int matched_object = -1;
  int matched_pose = -1;
  Metric metric = Metric::ssim;
  double score = 0.0;
  MatchClass classification = MatchClass::correct;
};

// Best database entry under the metric's orientation; ties broken by lowest
// (object_id, pose_id). Query provenance is taken from the candidate image.
MatchResult retrieve(const corpus::GrayImage& candidate,
                     std::span<const corpus::GrayImage> database, Metric metric);

struct MetricScores {
  Metric metric = Metric::ssim;
  int n_correct = 0;
  int n_angle = 0;
  int n_object = 0;
  double matching_score = 0.0;  // n_correct / n_queries
  double angle_share = 0.0;     // n_angle / mismatches (0 when no mismatches)
  double object_share = 0.0;
};

struct ScoreReport {
  std::vector<MetricScores> per_metric;
  std::vector<MatchResult> log;  // grouped by metric, then query order
  int n_queries = 0;
};

struct EvaluateInputs {
  std::span<const corpus::GrayImage> database;
  std::span<const corpus::GrayImage> queries;
  const Channel* channel = nullptr;
  std::vector<Metric> metrics;
  std::uint64_t run_seed = 0;
  // Per-query reading features keyed by (object_id, pose_id); required when
  // the channel is nearest_reading.
  const std::map<std::pair<int, int>, std::vector<double>>* query_features = nullptr;
};

// The distortion RNG is re-seeded per query from (run_seed, object, pose), so
// results do not depend on query order.
ScoreReport evaluate(const EvaluateInputs& in);

}  // namespace pwe::retrieval
