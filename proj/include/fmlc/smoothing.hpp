#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmlc/parallel.hpp"
#include "fmlc/raster.hpp"
#include "fmlc/simplex.hpp"

namespace fmlc {

enum class BlendVariant {
  /// Prior weight sigma2/(sigma2+s2): neighbours count less when they disagree.
  ProseConsistent,
  /// Coefficients in the printed order: prior weight s2/(sigma2+s2).
  LiteralEq11,
};

inline std::string to_string(BlendVariant v) {
  return v == BlendVariant::ProseConsistent ? "prose-consistent" : "literal-eq11";
}

inline BlendVariant parse_variant(const std::string& s) {
  if (s == "prose-consistent") return BlendVariant::ProseConsistent;
  if (s == "literal-eq11") return BlendVariant::LiteralEq11;
  throw ConfigError("unknown smoothing variant \"" + s + "\" (expected prose-consistent or literal-eq11)");
}

struct SmoothingParams {
  std::size_t window = 5;
  double alpha = 0.6;
  double sigma2 = 1.0;
  BlendVariant variant = BlendVariant::ProseConsistent;

  void validate() const {
    if (window == 0 || window % 2 == 0) throw ConfigError("smoothing window must be odd and >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("smoothing alpha must lie in (0, 1]");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ConfigError("smoothing sigma2 must be positive and finite");
  }

  /// ceil(W^2 * alpha), clamped to [1, W^2]. The small slack keeps products
  /// such as 25 * 0.6 from rounding up past an exact integer.
  std::size_t k_top() const {
    const double cells = static_cast<double>(window * window);
    const auto k = static_cast<std::size_t>(std::ceil(cells * alpha - 1e-9));
    return std::clamp<std::size_t>(k, 1, window * window);
  }
};

inline nlohmann::json to_json(const SmoothingParams& p) {
  return {{"window", p.window}, {"alpha", p.alpha}, {"sigma2", p.sigma2}, {"variant", to_string(p.variant)}};
}

inline SmoothingParams smoothing_from_json(const nlohmann::json& j, SmoothingParams base = {}) {
  try {
    if (j.contains("window")) base.window = j["window"].get<std::size_t>();
    if (j.contains("alpha")) base.alpha = j["alpha"].get<double>();
    if (j.contains("sigma2")) base.sigma2 = j["sigma2"].get<double>();
    if (j.contains("variant")) base.variant = parse_variant(j["variant"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad smoothing config: ") + e.what());
  }
  base.validate();
  return base;
}

struct WindowStats {
  LogitMap mean;
  LogitMap variance;
};

namespace smoothing_detail {

/// Mean and population variance of `values`, accumulated in the given order.
inline std::pair<float, float> moments(std::span<const float> values) {
  double sum = 0.0;
  for (float v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (float v : values) sq += (v - mean) * (v - mean);
  return {static_cast<float>(mean), static_cast<float>(sq / static_cast<double>(values.size()))};
}

}  // namespace smoothing_detail

/// Per pixel and channel: replicate-pad, take the W x W neighbourhood, keep its
/// k_top largest values and return their mean and population variance. The
/// selected values are summed in descending order.
inline WindowStats window_stats(const LogitMap& l, const SmoothingParams& params, std::size_t threads = 1) {
  params.validate();
  const std::size_t h = l.height();
  const std::size_t w = l.width();
  const std::size_t radius = params.window / 2;
  const std::size_t side = params.window;
  const std::size_t k = params.k_top();
  const std::size_t pw = w + 2 * radius;

  WindowStats out{LogitMap(h, w, l.classes()), LogitMap(h, w, l.classes())};
  std::vector<float> padded((h + 2 * radius) * pw);
  for (std::size_t c = 0; c < l.classes(); ++c) {
    for (std::size_t r = 0; r < h + 2 * radius; ++r) {
      const std::size_t sr = std::min(r > radius ? r - radius : 0, h - 1);
      for (std::size_t col = 0; col < pw; ++col) {
        const std::size_t sc = std::min(col > radius ? col - radius : 0, w - 1);
        padded[r * pw + col] = l(sr, sc, c);
      }
    }
    parallel_rows(h, threads, [&](std::size_t r0, std::size_t r1) {
      std::vector<float> window(side * side);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t col = 0; col < w; ++col) {
          std::size_t n = 0;
          for (std::size_t dr = 0; dr < side; ++dr) {
            const float* src = padded.data() + (r + dr) * pw + col;
            for (std::size_t dc = 0; dc < side; ++dc) window[n++] = src[dc];
          }
          if (k < window.size()) {
            std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(k - 1), window.end(),
                             std::greater<float>());
          }
          std::sort(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(k), std::greater<float>());
          const auto [mean, var] = smoothing_detail::moments(std::span<const float>(window.data(), k));
          out.mean(r, col, c) = mean;
          out.variance(r, col, c) = var;
        }
      }
    });
  }
  return out;
}

/// Gaussian prior/observation blend, written as l + w (m - l) so the result
/// stays between l and m.
inline double blend_value(double logit, double mean, double variance, double sigma2, BlendVariant variant) {
  const double prior_weight =
      variant == BlendVariant::ProseConsistent ? sigma2 / (sigma2 + variance) : variance / (sigma2 + variance);
  return logit + prior_weight * (mean - logit);
}

inline LogitMap blend(const LogitMap& l, const WindowStats& stats, const SmoothingParams& params) {
  params.validate();
  if (!(l.same_extent(stats.mean) && l.same_extent(stats.variance) && l.classes() == stats.mean.classes() &&
        l.classes() == stats.variance.classes())) {
    throw InvalidInput("blend: window statistics do not match the logit map shape");
  }
  LogitMap out(l.height(), l.width(), l.classes());
  auto src = l.values();
  auto m = stats.mean.values();
  auto s2 = stats.variance.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(blend_value(src[i], m[i], s2[i], params.sigma2, params.variant));
  }
  return out;
}

struct SmoothResult {
  LogitMap logits;
  ProbabilityMap probs;
  LabelMap labels;
};

/// window_stats -> blend -> softmax -> argmax. Labels are taken from the
/// blended logits; softmax is strictly monotone so this is the argmax of the
/// smoothed probabilities without exp rounding ties.
inline SmoothResult smooth(const LogitMap& l, const SmoothingParams& params, std::size_t threads = 1,
                           std::vector<std::string> legend = {}) {
  validate(l);
  LogitMap blended = blend(l, window_stats(l, params, threads), params);
  ProbabilityMap probs = softmax(blended);
  LabelMap labels = argmax_labels(blended, std::move(legend));
  return {std::move(blended), std::move(probs), std::move(labels)};
}

enum class Neighborhood { Four, Eight };

struct MrfParams {
  double beta = 1.0;
  Neighborhood neighborhood = Neighborhood::Four;
};

struct MrfEnergy {
  double unary = 0.0;
  std::uint64_t disagreements = 0;
  double pairwise = 0.0;  // beta * disagreements, unit edge weights
  double total = 0.0;
};

/// Number of neighbouring pixel pairs with different labels. Each undirected
/// edge is counted once.
inline std::uint64_t disagreeing_edges(const LabelMap& labels, Neighborhood nb = Neighborhood::Four) {
  const std::size_t h = labels.height();
  const std::size_t w = labels.width();
  std::uint64_t n = 0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto v = labels(r, c);
      if (c + 1 < w && labels(r, c + 1) != v) ++n;
      if (r + 1 < h && labels(r + 1, c) != v) ++n;
      if (nb == Neighborhood::Eight && r + 1 < h) {
        if (c + 1 < w && labels(r + 1, c + 1) != v) ++n;
        if (c > 0 && labels(r + 1, c - 1) != v) ++n;
      }
    }
  }
  return n;
}

/// Unary -sum log p(label) (clamped at 1e-9) plus beta times the disagreement
/// count. Diagnostic only; nothing here minimises it.
inline MrfEnergy mrf_energy(const LabelMap& labels, const ProbabilityMap& p, const MrfParams& params) {
  require_same_extent(labels, p, "mrf_energy");
  if (params.beta < 0.0) throw ConfigError("MRF beta must be non-negative");
  MrfEnergy e;
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    const std::size_t id = labels.at_pixel(i);
    if (id >= p.classes()) throw InvalidInput("mrf_energy: label id exceeds class count");
    e.unary -= std::log(std::max<double>(p.at_pixel(i, id), 1e-9));
  }
  e.disagreements = disagreeing_edges(labels, params.neighborhood);
  e.pairwise = params.beta * static_cast<double>(e.disagreements);
  e.total = e.unary + e.pairwise;
  return e;
}

/// Pixels whose 4-connected component has size one.
inline std::size_t count_isolated_pixels(const LabelMap& labels) {
  const std::size_t h = labels.height();
  const std::size_t w = labels.width();
  std::size_t n = 0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto v = labels(r, c);
      const bool joined = (r > 0 && labels(r - 1, c) == v) || (r + 1 < h && labels(r + 1, c) == v) ||
                          (c > 0 && labels(r, c - 1) == v) || (c + 1 < w && labels(r, c + 1) == v);
      if (!joined) ++n;
    }
  }
  return n;
}

}  // namespace fmlc
