#pragma once

// Seeded synthetic scenes and slow reference implementations used as test
// oracles.
//
// Random stream: std::mt19937_64 seeded with SceneSpec::seed. A uniform draw
// in [0,1) is (next() >> 11) * 2^-53. Blob seeds draw (row, col, class) in
// that order; every pixel then draws exactly five values in row-major order:
// confusion, jitter, impulse, impulse class, expert.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fmlc/raster.hpp"
#include "fmlc/smoothing.hpp"

namespace fmlc {

struct SceneSpec {
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t classes = 4;
  std::size_t blobs = 24;
  std::uint8_t flagged = 1;  // vegetation
  std::uint8_t partner = 0;  // water
  double confusion_strength = 0.0;
  double noise_rate = 0.0;
  std::uint64_t seed = 42;

  void validate() const {
    if (height == 0 || width == 0) throw ConfigError("scene extent must be positive");
    if (classes < 2 || classes > 256) throw ConfigError("scene needs between 2 and 256 classes");
    if (blobs == 0) throw ConfigError("scene needs at least one blob");
    if (flagged >= classes || partner >= classes || flagged == partner) {
      throw ConfigError("confusion pair must be two distinct classes below the class count");
    }
    if (!(confusion_strength >= 0.0 && confusion_strength <= 1.0)) throw ConfigError("confusion_strength must lie in [0,1]");
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("noise_rate must lie in [0,1]");
  }
};

struct Scene {
  LabelMap truth;
  ProbabilityMap coarse_probs;
  BinaryProbMap expert_probs;
};

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return std::min(static_cast<std::size_t>(uniform() * n), n - 1); }

 private:
  std::mt19937_64 engine_;
};

/// Piecewise-constant Voronoi truth with a classifier-like probability map.
/// Pair pixels put 0.8 of their mass on the pair; truth-flagged pixels swap
/// the pair's ordering with probability confusion_strength, truth-partner
/// pixels with a quarter of it. Impulses put 0.85 on a random wrong class.
/// The expert separates the pair with probabilities in [0.8, 0.99) vs [0.01, 0.2).
inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  SceneRng rng(spec.seed);
  const std::size_t C = spec.classes;

  struct Seed {
    double row, col;
    std::uint8_t cls;
  };
  std::vector<Seed> seeds;
  for (std::size_t s = 0; s < spec.blobs; ++s) {
    const double r = rng.uniform() * static_cast<double>(spec.height);
    const double c = rng.uniform() * static_cast<double>(spec.width);
    const std::size_t drawn = rng.below(C);
    seeds.push_back({r, c, static_cast<std::uint8_t>(s < C ? s : drawn)});
  }

  std::vector<std::string> legend = C == 4 ? land_cover_legend() : default_legend(C);
  Scene scene{LabelMap(spec.height, spec.width, legend), ProbabilityMap(spec.height, spec.width, C),
              BinaryProbMap(spec.height, spec.width)};

  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t c = 0; c < spec.width; ++c) {
      double best = INFINITY;
      std::uint8_t cls = 0;
      for (const Seed& s : seeds) {
        const double dr = static_cast<double>(r) + 0.5 - s.row;
        const double dc = static_cast<double>(c) + 0.5 - s.col;
        const double d = dr * dr + dc * dc;
        if (d < best) {
          best = d;
          cls = s.cls;
        }
      }
      scene.truth(r, c) = cls;
    }
  }

  std::vector<double> p(C);
  for (std::size_t i = 0; i < scene.truth.pixels(); ++i) {
    const double u_conf = rng.uniform();
    const double u_jitter = rng.uniform();
    const double u_noise = rng.uniform();
    const std::size_t noise_pick = rng.below(C - 1);
    const double u_expert = rng.uniform();

    const std::uint8_t t = scene.truth.at_pixel(i);
    const bool in_pair = t == spec.flagged || t == spec.partner;
    if (in_pair) {
      const double pair_mass = C == 2 ? 1.0 : 0.8;
      std::fill(p.begin(), p.end(), C == 2 ? 0.0 : 0.2 / static_cast<double>(C - 2));
      const double rate = t == spec.flagged ? spec.confusion_strength : spec.confusion_strength / 4.0;
      const bool confused = u_conf < rate;
      const double f = confused ? 0.1 + 0.3 * u_jitter : 0.6 + 0.3 * u_jitter;
      const std::uint8_t other = t == spec.flagged ? spec.partner : spec.flagged;
      p[t] = pair_mass * f;
      p[other] = pair_mass * (1.0 - f);
    } else {
      const double top = 0.6 + 0.3 * u_jitter;
      std::fill(p.begin(), p.end(), (1.0 - top) / static_cast<double>(C - 1));
      p[t] = top;
    }
    if (u_noise < spec.noise_rate) {
      const std::size_t wrong = noise_pick >= t ? noise_pick + 1 : noise_pick;
      std::fill(p.begin(), p.end(), 0.15 / static_cast<double>(C - 1));
      p[wrong] = 0.85;
    }
    for (std::size_t k = 0; k < C; ++k) scene.coarse_probs.at_pixel(i, k) = static_cast<float>(p[k]);

    const double e = t == spec.flagged ? 0.8 + 0.19 * u_expert : 0.01 + 0.19 * u_expert;
    scene.expert_probs.at_pixel(i) = static_cast<float>(e);
  }
  return scene;
}

/// Direct transcription of the windowed statistics: materialise every
/// neighbourhood (clamped coordinates), stable-sort by value descending then
/// row-major position, keep the first k_top.
inline WindowStats naive_window_stats(const LogitMap& l, const SmoothingParams& params) {
  params.validate();
  const auto h = static_cast<std::ptrdiff_t>(l.height());
  const auto w = static_cast<std::ptrdiff_t>(l.width());
  const auto radius = static_cast<std::ptrdiff_t>(params.window / 2);
  const std::size_t k = params.k_top();
  WindowStats out{LogitMap(l.height(), l.width(), l.classes()), LogitMap(l.height(), l.width(), l.classes())};
  for (std::size_t c = 0; c < l.classes(); ++c) {
    for (std::ptrdiff_t r = 0; r < h; ++r) {
      for (std::ptrdiff_t col = 0; col < w; ++col) {
        std::vector<std::pair<float, std::size_t>> cells;
        std::size_t pos = 0;
        for (std::ptrdiff_t dr = -radius; dr <= radius; ++dr) {
          for (std::ptrdiff_t dc = -radius; dc <= radius; ++dc) {
            const auto rr = std::clamp<std::ptrdiff_t>(r + dr, 0, h - 1);
            const auto cc = std::clamp<std::ptrdiff_t>(col + dc, 0, w - 1);
            cells.emplace_back(l(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), c), pos++);
          }
        }
        std::stable_sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
          return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += cells[i].first;
        const double mean = sum / static_cast<double>(k);
        double sq = 0.0;
        for (std::size_t i = 0; i < k; ++i) sq += (cells[i].first - mean) * (cells[i].first - mean);
        out.mean(static_cast<std::size_t>(r), static_cast<std::size_t>(col), c) = static_cast<float>(mean);
        out.variance(static_cast<std::size_t>(r), static_cast<std::size_t>(col), c) =
            static_cast<float>(sq / static_cast<double>(k));
      }
    }
  }
  return out;
}

/// Smoothed logits from the naive statistics.
inline LogitMap naive_smooth_reference(const LogitMap& l, const SmoothingParams& params) {
  const WindowStats stats = naive_window_stats(l, params);
  LogitMap out(l.height(), l.width(), l.classes());
  for (std::size_t i = 0; i < l.size(); ++i) {
    const double x = l.values()[i];
    const double m = stats.mean.values()[i];
    const double s2 = stats.variance.values()[i];
    const double w = params.variant == BlendVariant::ProseConsistent ? params.sigma2 / (params.sigma2 + s2)
                                                                      : s2 / (params.sigma2 + s2);
    out.values()[i] = static_cast<float>(x + w * (m - x));
  }
  return out;
}

}  // namespace fmlc
