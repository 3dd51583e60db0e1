#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fmlc/grid.hpp"

namespace fmlc {

/// Generic floating-point imagery with band metadata.
class MultiBandRaster : public Grid<float> {
 public:
  MultiBandRaster() = default;
  MultiBandRaster(std::size_t h, std::size_t w, std::size_t b, float fill = 0.0f) : Grid(h, w, b, fill) {}
  MultiBandRaster(std::size_t h, std::size_t w, std::size_t b, std::vector<float> data)
      : Grid(h, w, b, std::move(data)) {}
  explicit MultiBandRaster(Grid<float> g) : Grid(std::move(g)) {}

  std::vector<std::string> band_names;
  std::optional<float> nodata;

  bool is_nodata(float v) const noexcept {
    if (!nodata) return false;
    return std::isnan(*nodata) ? std::isnan(v) : v == *nodata;
  }

  MultiBandRaster blank_like(std::size_t h, std::size_t w) const {
    MultiBandRaster out(h, w, bands());
    out.band_names = band_names;
    out.nodata = nodata;
    return out;
  }

  friend bool operator==(const MultiBandRaster&, const MultiBandRaster&) = default;
};

struct ProbabilityTag {};
struct LogitTag {};

/// H x W x C per-pixel class scores; the tag separates simplex probabilities
/// from unconstrained logits at the type level.
template <typename Tag>
class ClassMap : public Grid<float> {
 public:
  ClassMap() = default;
  ClassMap(std::size_t h, std::size_t w, std::size_t classes, float fill = 0.0f) : Grid(h, w, classes, fill) {}
  ClassMap(std::size_t h, std::size_t w, std::size_t classes, std::vector<float> data)
      : Grid(h, w, classes, std::move(data)) {}
  explicit ClassMap(Grid<float> g) : Grid(std::move(g)) {}

  std::size_t classes() const noexcept { return bands(); }

  ClassMap blank_like(std::size_t h, std::size_t w) const { return ClassMap(h, w, classes()); }
};

using ProbabilityMap = ClassMap<ProbabilityTag>;
using LogitMap = ClassMap<LogitTag>;

/// Expert output: per-pixel probability of the flagged class.
class BinaryProbMap : public Grid<float> {
 public:
  BinaryProbMap() = default;
  BinaryProbMap(std::size_t h, std::size_t w, float fill = 0.0f) : Grid(h, w, 1, fill) {}
  BinaryProbMap(std::size_t h, std::size_t w, std::vector<float> data) : Grid(h, w, 1, std::move(data)) {}
};

/// Hard class ids with a legend; ids index the legend (contiguous from 0).
class LabelMap : public Grid<std::uint8_t> {
 public:
  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::vector<std::string> legend_names, std::uint8_t fill = 0)
      : Grid(h, w, 1, fill), legend(std::move(legend_names)) {}
  LabelMap(std::size_t h, std::size_t w, std::vector<std::uint8_t> data, std::vector<std::string> legend_names)
      : Grid(h, w, 1, std::move(data)), legend(std::move(legend_names)) {}

  std::vector<std::string> legend;

  std::size_t classes() const noexcept { return legend.size(); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// 0/1 per-pixel membership, used for Omega_k domains and binary targets.
using PixelMask = Grid<std::uint8_t>;

/// Names "class_0" ... "class_{n-1}".
inline std::vector<std::string> default_legend(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) names.push_back("class_" + std::to_string(i));
  return names;
}

/// Four land-cover classes: water, vegetation, built area, bare ground.
inline std::vector<std::string> land_cover_legend() { return {"water", "vegetation", "built_area", "bare_ground"}; }

inline void validate(const ProbabilityMap& p, double tolerance = 1e-5) {
  if (p.classes() < 2) throw InvalidInput("probability map needs at least 2 classes");
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < p.classes(); ++c) {
      const float v = p.at_pixel(i, c);
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw InvalidInput("probability " + std::to_string(v) + " outside [0,1] at pixel " + std::to_string(i));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw InvalidInput("probabilities at pixel " + std::to_string(i) + " sum to " + std::to_string(sum));
    }
  }
}

inline void validate(const LogitMap& l) {
  for (float v : l.values()) {
    if (!std::isfinite(v)) throw InvalidInput("logit map contains a non-finite value");
  }
}

inline void validate(const BinaryProbMap& g) {
  for (float v : g.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidInput("binary probability " + std::to_string(v) + " outside [0,1]");
  }
}

inline void validate(const LabelMap& m) {
  if (m.legend.empty()) throw InvalidInput("label map has an empty legend");
  if (m.legend.size() > 256) throw CapacityError("legend has " + std::to_string(m.legend.size()) + " classes, max 256");
  for (std::uint8_t id : m.values()) {
    if (id >= m.legend.size()) {
      throw InvalidInput("label id " + std::to_string(id) + " missing from legend of size " +
                         std::to_string(m.legend.size()));
    }
  }
}

}  // namespace fmlc
