#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmlc/parallel.hpp"
#include "fmlc/raster.hpp"

namespace fmlc {

enum class EdgePolicy { PadReplicate, ClipPartial };

struct TileSpec {
  std::size_t tile_size = 256;
  std::size_t stride = 128;
  EdgePolicy edge_policy = EdgePolicy::PadReplicate;

  void validate() const {
    if (tile_size == 0 || stride == 0 || stride > tile_size) {
      throw ConfigError("tile spec requires 0 < stride <= tile_size (got tile " + std::to_string(tile_size) +
                        ", stride " + std::to_string(stride) + ")");
    }
  }
};

struct Origin {
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const Origin&, const Origin&) = default;
};

template <typename Map>
struct Tile {
  Map data;
  Origin origin;
};

/// Number of tile origins along an axis of length `extent`.
inline std::size_t tiles_along(std::size_t extent, const TileSpec& spec) {
  spec.validate();
  if (extent <= spec.tile_size) return 1;
  return (extent - spec.tile_size + spec.stride - 1) / spec.stride + 1;
}

/// Origins at (r * stride, c * stride), row-major, covering the raster.
inline std::vector<Origin> tile_origins(std::size_t height, std::size_t width, const TileSpec& spec) {
  const std::size_t rows = tiles_along(height, spec);
  const std::size_t cols = tiles_along(width, spec);
  std::vector<Origin> out;
  out.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.push_back({r * spec.stride, c * spec.stride});
  }
  return out;
}

/// Cuts `x` into tiles. Under PadReplicate every tile is tile_size x tile_size
/// and samples beyond the raster repeat the nearest edge pixel; under
/// ClipPartial edge tiles are truncated to the raster extent.
template <typename Map>
std::vector<Tile<Map>> tile(const Map& x, const TileSpec& spec) {
  spec.validate();
  std::vector<Tile<Map>> out;
  for (const Origin& o : tile_origins(x.height(), x.width(), spec)) {
    std::size_t th = spec.tile_size;
    std::size_t tw = spec.tile_size;
    if (spec.edge_policy == EdgePolicy::ClipPartial) {
      th = std::min(th, x.height() - o.row);
      tw = std::min(tw, x.width() - o.col);
    }
    Map t = x.blank_like(th, tw);
    for (std::size_t b = 0; b < x.bands(); ++b) {
      for (std::size_t r = 0; r < th; ++r) {
        const std::size_t sr = std::min(o.row + r, x.height() - 1);
        for (std::size_t c = 0; c < tw; ++c) {
          const std::size_t sc = std::min(o.col + c, x.width() - 1);
          t(r, c, b) = x(sr, sc, b);
        }
      }
    }
    out.push_back({std::move(t), o});
  }
  return out;
}

/// Reassembles tiles into an `height` x `width` map. Overlaps are averaged,
/// tile parts outside the output are cropped. Accumulation per pixel follows
/// tile list order, so the result does not depend on `threads`.
template <typename Map>
Map stitch(const std::vector<Tile<Map>>& tiles, std::size_t height, std::size_t width,
           std::size_t threads = 1) {
  if (tiles.empty()) throw CoverageError("stitch: no tiles supplied");
  const std::size_t bands = tiles.front().data.bands();
  for (const auto& t : tiles) {
    if (t.data.bands() != bands) throw InvalidInput("stitch: tiles disagree on channel count");
  }
  Map out = tiles.front().data.blank_like(height, width);
  std::vector<double> sum(height * width * bands, 0.0);
  std::vector<std::uint32_t> hits(height * width, 0);

  parallel_rows(height, threads, [&](std::size_t r0, std::size_t r1) {
    for (const auto& t : tiles) {
      const std::size_t top = std::max(r0, t.origin.row);
      const std::size_t bottom = std::min(r1, t.origin.row + t.data.height());
      if (top >= bottom || t.origin.col >= width) continue;
      const std::size_t right = std::min(width, t.origin.col + t.data.width());
      for (std::size_t r = top; r < bottom; ++r) {
        for (std::size_t c = t.origin.col; c < right; ++c) {
          ++hits[r * width + c];
          for (std::size_t b = 0; b < bands; ++b) {
            sum[(b * height + r) * width + c] += t.data(r - t.origin.row, c - t.origin.col, b);
          }
        }
      }
    }
  });

  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i] == 0) {
      throw CoverageError("stitch: pixel (" + std::to_string(i / width) + ", " + std::to_string(i % width) +
                          ") is not covered by any tile");
    }
  }
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t i = 0; i < height * width; ++i) {
      out.at_pixel(i, b) = static_cast<float>(sum[b * height * width + i] / hits[i]);
    }
  }
  return out;
}

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  void validate_for(std::size_t bands) const {
    if (mean.size() != bands || stddev.size() != bands) {
      throw InvalidInput("normalization stats have " + std::to_string(mean.size()) + " bands, raster has " +
                         std::to_string(bands));
    }
    for (std::size_t b = 0; b < bands; ++b) {
      if (!(stddev[b] > 0.0)) throw InvalidInput("band " + std::to_string(b) + " has non-positive stddev");
    }
  }

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

/// Population mean and standard deviation per band, skipping nodata.
inline NormalizationStats compute_stats(const MultiBandRaster& x) {
  if (x.pixels() < 2) throw InvalidInput("compute_stats needs at least 2 pixels per band");
  NormalizationStats s;
  for (std::size_t b = 0; b < x.bands(); ++b) {
    double sum = 0.0;
    std::size_t n = 0;
    for (float v : x.band(b)) {
      if (x.is_nodata(v)) continue;
      sum += v;
      ++n;
    }
    if (n == 0) throw InvalidInput("band " + std::to_string(b) + " is entirely nodata");
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (float v : x.band(b)) {
      if (x.is_nodata(v)) continue;
      sq += (v - mean) * (v - mean);
    }
    s.mean.push_back(mean);
    s.stddev.push_back(std::sqrt(sq / static_cast<double>(n)));
  }
  return s;
}

/// (x - mean) / stddev per band. Nodata pixels pass through unchanged.
inline MultiBandRaster standardize(const MultiBandRaster& x, const NormalizationStats& s) {
  s.validate_for(x.bands());
  MultiBandRaster out = x;
  for (std::size_t b = 0; b < x.bands(); ++b) {
    auto dst = out.band(b);
    for (float& v : dst) {
      if (!x.is_nodata(v)) v = static_cast<float>((v - s.mean[b]) / s.stddev[b]);
    }
  }
  return out;
}

inline MultiBandRaster destandardize(const MultiBandRaster& x, const NormalizationStats& s) {
  s.validate_for(x.bands());
  MultiBandRaster out = x;
  for (std::size_t b = 0; b < x.bands(); ++b) {
    for (float& v : out.band(b)) {
      if (!x.is_nodata(v)) v = static_cast<float>(v * s.stddev[b] + s.mean[b]);
    }
  }
  return out;
}

inline nlohmann::json to_json(const NormalizationStats& s) { return {{"mean", s.mean}, {"stddev", s.stddev}}; }

inline NormalizationStats stats_from_json(const nlohmann::json& j) {
  try {
    return {j.at("mean").get<std::vector<double>>(), j.at("stddev").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("bad normalization stats JSON: ") + e.what());
  }
}

}  // namespace fmlc
