#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fmlc/raster.hpp"

namespace fmlc {

inline constexpr double kLossEps = 1e-9;

/// Summed pixel cross-entropy at the true class plus lambda * ||theta||^2.
/// The squared parameter norm is supplied by the caller.
inline double multiclass_ce_loss(const ProbabilityMap& p, const LabelMap& y, double lambda = 0.0,
                                 double param_sq_norm = 0.0) {
  require_same_extent(p, y, "multiclass_ce_loss");
  if (lambda < 0.0 || param_sq_norm < 0.0) throw InvalidInput("lambda and param_sq_norm must be non-negative");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const std::size_t t = y.at_pixel(i);
    if (t >= p.classes()) {
      throw InvalidInput("label id " + std::to_string(t) + " >= class count " + std::to_string(p.classes()));
    }
    loss -= std::log(std::clamp<double>(p.at_pixel(i, t), kLossEps, 1.0));
  }
  return loss + lambda * param_sq_norm;
}

struct BinaryLoss {
  double value = 0.0;
  bool empty_domain = false;
};

/// Binary cross-entropy summed over pixels where `domain` is nonzero.
/// `target` is 1 where the pixel truly belongs to the flagged class.
inline BinaryLoss binary_ce_loss(const BinaryProbMap& g, const PixelMask& target, const PixelMask& domain) {
  require_same_extent(g, target, "binary_ce_loss");
  require_same_extent(g, domain, "binary_ce_loss");
  BinaryLoss out;
  std::size_t members = 0;
  for (std::size_t i = 0; i < g.pixels(); ++i) {
    if (!domain.at_pixel(i)) continue;
    ++members;
    const double q = g.at_pixel(i);
    out.value -= target.at_pixel(i) ? std::log(std::max(q, kLossEps)) : std::log(std::max(1.0 - q, kLossEps));
  }
  out.empty_domain = members == 0;
  return out;
}

}  // namespace fmlc
