#include "pwe/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pwe/common.hpp"

namespace pwe::retrieval {
namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr int kMiBins = 64;

void require_same_shape(const corpus::GrayImage& a, const corpus::GrayImage& b) {
  if (a.width != b.width || a.height != b.height) {
    std::ostringstream os;
    os << "image dimensions differ: " << a.width << "x" << a.height << " vs " << b.width << "x"
       << b.height;
    throw DimensionError(os.str());
  }
}

// Normalized 1-D Gaussian taps; the 2-D 11x11 window is their outer product,
// so both blur passes below compute the exact windowed sums.
const std::array<double, kSsimWindow>& ssim_taps() {
  static const std::array<double, kSsimWindow> k = [] {
    std::array<double, kSsimWindow> w{};
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = i - half;
      w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
      sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return w;
  }();
  return k;
}

// Gaussian-weighted window sums of a (or a*b elementwise when b is given),
// evaluated only where the window fits; output is (w-10) x (h-10).
std::vector<double> blur_valid(const double* a, const double* b, int w, int h) {
  const auto& g = ssim_taps();
  const int vw = w - kSsimWindow + 1;
  const int vh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(vw) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) {
        const std::size_t idx = static_cast<std::size_t>(y) * w + x + k;
        const double v = b ? a[idx] * b[idx] : a[idx];
        s += g[static_cast<std::size_t>(k)] * v;
      }
      tmp[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(vw) * vh);
  for (int y = 0; y < vh; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k)
        s += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(y + k) * vw + x];
      out[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  return out;
}

struct SsimMaps {
  std::vector<double> mean;    // G * a
  std::vector<double> moment;  // G * (a.a)
};

SsimMaps make_ssim_maps(const corpus::GrayImage& img) {
  return {blur_valid(img.pixels.data(), nullptr, img.width, img.height),
          blur_valid(img.pixels.data(), img.pixels.data(), img.width, img.height)};
}

double ssim_from_maps(const corpus::GrayImage& a, const SsimMaps& ma,
                      const corpus::GrayImage& b, const SsimMaps& mb) {
  constexpr double c1 = 0.01 * 0.01;  // (k1*L)^2, L = 1
  constexpr double c2 = 0.03 * 0.03;
  const std::vector<double> cross = blur_valid(a.pixels.data(), b.pixels.data(), a.width, a.height);
  double total = 0.0;
  for (std::size_t i = 0; i < cross.size(); ++i) {
    const double mu_a = ma.mean[i];
    const double mu_b = mb.mean[i];
    const double va = ma.moment[i] - mu_a * mu_a;
    const double vb = mb.moment[i] - mu_b * mu_b;
    const double cab = cross[i] - mu_a * mu_b;
    const double num = (2 * mu_a * mu_b + c1) * (2 * cab + c2);
    const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(cross.size());
}

int bin_of(double v) {
  const int b = static_cast<int>(std::floor(v * kMiBins));
  return std::clamp(b, 0, kMiBins - 1);
}

std::vector<double> box_blur(const std::vector<double>& src, int w, int h, int radius) {
  if (radius <= 0) return src;
  std::vector<double> dst(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          sum += src[static_cast<std::size_t>(yy) * w + xx];
          ++count;
        }
      }
      dst[static_cast<std::size_t>(y) * w + x] = sum / count;
    }
  }
  return dst;
}

std::vector<double> shift_image(const std::vector<double>& src, int w, int h, int shift) {
  if (shift == 0) return src;
  std::vector<double> dst(src.size());
  for (int y = 0; y < h; ++y) {
    const int sy = std::clamp(y - shift, 0, h - 1);
    for (int x = 0; x < w; ++x) {
      const int sx = std::clamp(x - shift, 0, w - 1);
      dst[static_cast<std::size_t>(y) * w + x] = src[static_cast<std::size_t>(sy) * w + sx];
    }
  }
  return dst;
}

}  // namespace

Metric metric_from_name(const std::string& name) {
  if (name == "ssim") return Metric::ssim;
  if (name == "l2") return Metric::l2;
  if (name == "psnr") return Metric::psnr;
  if (name == "mi" || name == "mutual_information") return Metric::mutual_information;
  if (name == "cosine") return Metric::cosine;
  throw ConfigError("unknown metric: " + name);
}

const char* name_of(Metric m) {
  switch (m) {
    case Metric::ssim: return "ssim";
    case Metric::l2: return "l2";
    case Metric::psnr: return "psnr";
    case Metric::mutual_information: return "mi";
    case Metric::cosine: return "cosine";
  }
  return "?";
}

bool higher_is_better(Metric m) { return m != Metric::l2; }

Channel channel_from_name(const std::string& kind) {
  Channel c;
  if (kind == "identity") {
    c.kind = Channel::Kind::identity;
  } else if (kind == "distortion") {
    c.kind = Channel::Kind::distortion;
  } else if (kind == "nearest_reading") {
    c.kind = Channel::Kind::nearest_reading;
  } else {
    throw ConfigError("unknown reconstruction channel: " + kind);
  }
  return c;
}

corpus::GrayImage reconstruct(const Channel& channel, std::span<const double> query_features,
                              const corpus::GrayImage& truth, std::uint64_t noise_seed) {
  switch (channel.kind) {
    case Channel::Kind::identity: return truth;
    case Channel::Kind::distortion: {
      corpus::GrayImage out = truth;
      if (channel.noise_sigma > 0.0) {
        NormalSampler normal(noise_seed);
        for (double& p : out.pixels)
          p = std::clamp(p + channel.noise_sigma * normal.next(), 0.0, 1.0);
      }
      out.pixels = box_blur(out.pixels, out.width, out.height, channel.blur_radius);
      out.pixels = shift_image(out.pixels, out.width, out.height, channel.shift_px);
      return out;
    }
    case Channel::Kind::nearest_reading: {
      if (channel.store.empty())
        throw Error("nearest-reading channel has an empty training store");
      const Channel::StoredReading* best = nullptr;
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& s : channel.store) {
        if (s.features.size() != query_features.size())
          throw DimensionError("stored reading feature length differs from query");
        double d = 0.0;
        for (std::size_t i = 0; i < s.features.size(); ++i) {
          const double diff = s.features[i] - query_features[i];
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = &s;
        }
      }
      corpus::GrayImage out = best->image;
      // Provenance stays with the query; the pixels come from the store.
      out.object_id = truth.object_id;
      out.pose_id = truth.pose_id;
      return out;
    }
  }
  throw Error("unknown channel kind");
}

double ssim(const corpus::GrayImage& a, const corpus::GrayImage& b) {
  require_same_shape(a, b);
  if (a.width < kSsimWindow || a.height < kSsimWindow)
    throw DimensionError("images must be at least 11x11 for ssim");
  return ssim_from_maps(a, make_ssim_maps(a), b, make_ssim_maps(b));
}

double l2(const corpus::GrayImage& a, const corpus::GrayImage& b) {
  require_same_shape(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double psnr(const corpus::GrayImage& a, const corpus::GrayImage& b) {
  require_same_shape(a, b);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);  // peak = 1 for unit-range images
}

double mutual_information(const corpus::GrayImage& a, const corpus::GrayImage& b) {
  require_same_shape(a, b);
  std::vector<double> joint(kMiBins * kMiBins, 0.0);
  std::vector<double> pa(kMiBins, 0.0), pb(kMiBins, 0.0);
  const double n = static_cast<double>(a.pixels.size());
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const int ba = bin_of(a.pixels[i]);
    const int bb = bin_of(b.pixels[i]);
    joint[static_cast<std::size_t>(ba) * kMiBins + bb] += 1.0;
  }
  for (int i = 0; i < kMiBins; ++i) {
    for (int j = 0; j < kMiBins; ++j) {
      const double p = joint[static_cast<std::size_t>(i) * kMiBins + j] / n;
      joint[static_cast<std::size_t>(i) * kMiBins + j] = p;
      pa[static_cast<std::size_t>(i)] += p;
      pb[static_cast<std::size_t>(j)] += p;
    }
  }
  double mi = 0.0;
  for (int i = 0; i < kMiBins; ++i) {
    for (int j = 0; j < kMiBins; ++j) {
      const double p = joint[static_cast<std::size_t>(i) * kMiBins + j];
      if (p > 0.0) mi += p * std::log2(p / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
    }
  }
  return mi;
}

double cosine(const corpus::GrayImage& a, const corpus::GrayImage& b) {
  require_same_shape(a, b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    dot += a.pixels[i] * b.pixels[i];
    na += a.pixels[i] * a.pixels[i];
    nb += b.pixels[i] * b.pixels[i];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;  // two blank images are identical
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double score(Metric m, const corpus::GrayImage& a, const corpus::GrayImage& b) {
  switch (m) {
    case Metric::ssim: return ssim(a, b);
    case Metric::l2: return l2(a, b);
    case Metric::psnr: return psnr(a, b);
    case Metric::mutual_information: return mutual_information(a, b);
    case Metric::cosine: return cosine(a, b);
  }
  throw Error("unknown metric");
}

const char* name_of(MatchClass c) {
  switch (c) {
    case MatchClass::correct: return "correct";
    case MatchClass::angle_mismatch: return "angle_mismatch";
    case MatchClass::object_mismatch: return "object_mismatch";
  }
  return "?";
}

namespace {

using MapsCache = std::map<const corpus::GrayImage*, SsimMaps>;

// Same arithmetic as score(); the cache only skips recomputing per-image
// window statistics, so cached and uncached paths agree bitwise.
double score_cached(Metric m, const corpus::GrayImage& a, const corpus::GrayImage& b,
                    MapsCache* cache) {
  if (m != Metric::ssim || !cache) return score(m, a, b);
  require_same_shape(a, b);
  if (a.width < kSsimWindow || a.height < kSsimWindow)
    throw DimensionError("images must be at least 11x11 for ssim");
  auto get = [&](const corpus::GrayImage& img) -> const SsimMaps& {
    auto it = cache->find(&img);
    if (it == cache->end()) it = cache->emplace(&img, make_ssim_maps(img)).first;
    return it->second;
  };
  return ssim_from_maps(a, get(a), b, get(b));
}

MatchResult retrieve_impl(const corpus::GrayImage& candidate,
                          std::span<const corpus::GrayImage> database, Metric metric,
                          MapsCache* cache) {
  if (database.empty()) throw Error("retrieval database is empty");
  const bool maximize = higher_is_better(metric);

  const corpus::GrayImage* best = nullptr;
  double best_score = 0.0;
  for (const auto& entry : database) {
    const double s = score_cached(metric, candidate, entry, cache);
    bool take = false;
    if (!best) {
      take = true;
    } else if (s != best_score) {
      take = maximize ? s > best_score : s < best_score;
    } else {
      take = std::pair(entry.object_id, entry.pose_id) <
             std::pair(best->object_id, best->pose_id);
    }
    if (take) {
      best = &entry;
      best_score = s;
    }
  }

  MatchResult r;
  r.query_object = candidate.object_id;
  r.query_pose = candidate.pose_id;
  r.matched_object = best->object_id;
  r.matched_pose = best->pose_id;
  r.metric = metric;
  r.score = best_score;
  if (r.matched_object == r.query_object && r.matched_pose == r.query_pose)
    r.classification = MatchClass::correct;
  else if (r.matched_object == r.query_object)
    r.classification = MatchClass::angle_mismatch;
  else
    r.classification = MatchClass::object_mismatch;
  return r;
}

}  // namespace

MatchResult retrieve(const corpus::GrayImage& candidate,
                     std::span<const corpus::GrayImage> database, Metric metric) {
  return retrieve_impl(candidate, database, metric, nullptr);
}

ScoreReport evaluate(const EvaluateInputs& in) {
  if (in.queries.empty()) throw Error("query set is empty");
  if (in.database.empty()) throw Error("retrieval database is empty");
  if (!in.channel) throw Error("no reconstruction channel configured");
  if (in.metrics.empty()) throw Error("no metrics configured");

  ScoreReport report;
  report.n_queries = static_cast<int>(in.queries.size());

  // Reconstruct once per query; metrics share the candidate.
  std::vector<corpus::GrayImage> candidates;
  candidates.reserve(in.queries.size());
  for (const auto& q : in.queries) {
    std::ostringstream key;
    key << in.run_seed << "/" << q.object_id << "/" << q.pose_id;
    const std::uint64_t noise_seed = fnv1a64(key.str());
    std::span<const double> features;
    if (in.channel->kind == Channel::Kind::nearest_reading) {
      if (!in.query_features)
        throw Error("nearest-reading channel requires query reading features");
      auto it = in.query_features->find({q.object_id, q.pose_id});
      if (it == in.query_features->end()) {
        std::ostringstream os;
        os << "no reading features for query object " << q.object_id << " pose " << q.pose_id;
        throw Error(os.str());
      }
      features = it->second;
    }
    candidates.push_back(reconstruct(*in.channel, features, q, noise_seed));
  }

  MapsCache maps_cache;
  for (Metric m : in.metrics) {
    MetricScores ms;
    ms.metric = m;
    for (const auto& candidate : candidates) {
      MatchResult r = retrieve_impl(candidate, in.database, m, &maps_cache);
      switch (r.classification) {
        case MatchClass::correct: ++ms.n_correct; break;
        case MatchClass::angle_mismatch: ++ms.n_angle; break;
        case MatchClass::object_mismatch: ++ms.n_object; break;
      }
      report.log.push_back(r);
    }
    const int mismatches = ms.n_angle + ms.n_object;
    ms.matching_score = static_cast<double>(ms.n_correct) / report.n_queries;
    ms.angle_share = mismatches ? static_cast<double>(ms.n_angle) / mismatches : 0.0;
    ms.object_share = mismatches ? static_cast<double>(ms.n_object) / mismatches : 0.0;
    report.per_metric.push_back(ms);
  }
  return report;
}

}  // namespace pwe::retrieval
