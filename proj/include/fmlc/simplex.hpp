#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fmlc/raster.hpp"

namespace fmlc {

inline constexpr double kDefaultLogitEps = 1e-6;

/// log(q / (1 - q)) with q = clamp(p, eps, 1 - eps).
inline double clamped_logit(double p, double eps = kDefaultLogitEps) {
  const double q = std::clamp(p, eps, 1.0 - eps);
  return std::log(q / (1.0 - q));
}

inline LogitMap probs_to_logits(const ProbabilityMap& p, double eps = kDefaultLogitEps) {
  if (!(eps > 0.0 && eps < 0.5)) throw InvalidInput("logit clamp eps must lie in (0, 0.5)");
  if (p.size() == 0) throw InvalidInput("probs_to_logits: empty probability map");
  LogitMap out(p.height(), p.width(), p.classes());
  auto src = p.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(clamped_logit(src[i], eps));
  return out;
}

/// Per-pixel softmax over classes, stabilised by subtracting the pixel max.
inline ProbabilityMap softmax(const LogitMap& l) {
  if (l.size() == 0) throw InvalidInput("softmax: empty logit map");
  ProbabilityMap out(l.height(), l.width(), l.classes());
  const std::size_t classes = l.classes();
  std::vector<double> e(classes);
  for (std::size_t i = 0; i < l.pixels(); ++i) {
    double hi = l.at_pixel(i, 0);
    for (std::size_t c = 1; c < classes; ++c) hi = std::max<double>(hi, l.at_pixel(i, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      e[c] = std::exp(static_cast<double>(l.at_pixel(i, c)) - hi);
      sum += e[c];
    }
    for (std::size_t c = 0; c < classes; ++c) out.at_pixel(i, c) = static_cast<float>(e[c] / sum);
  }
  return out;
}

/// Index of the largest channel per pixel; ties go to the lowest class id.
template <typename Tag>
LabelMap argmax_labels(const ClassMap<Tag>& scores, std::vector<std::string> legend = {}) {
  const std::size_t classes = scores.classes();
  if (classes > 256) throw CapacityError("argmax_labels: more than 256 classes");
  if (legend.empty()) legend = default_legend(classes);
  if (legend.size() != classes) throw InvalidInput("argmax_labels: legend size does not match class count");
  LabelMap out(scores.height(), scores.width(), std::move(legend));
  for (std::size_t i = 0; i < scores.pixels(); ++i) {
    std::size_t best = 0;
    float best_value = scores.at_pixel(i, 0);
    for (std::size_t c = 1; c < classes; ++c) {
      const float v = scores.at_pixel(i, c);
      if (v > best_value) {
        best_value = v;
        best = c;
      }
    }
    out.at_pixel(i) = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace fmlc
