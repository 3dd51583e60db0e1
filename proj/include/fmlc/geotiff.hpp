#pragma once

// Minimal classic-TIFF subset for label rasters: uncompressed, strip based,
// chunky samples, 8-bit unsigned or 32-bit float. GeoTIFF tags are carried as
// opaque bytes so they can be re-emitted without interpretation.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmlc/raster.hpp"
#include "fmlc/tensor_io.hpp"

namespace fmlc {

namespace tiff {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kImageDescription = 270,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfiguration = 284,
  kTileWidth = 322,
  kTileLength = 323,
  kTileOffsets = 324,
  kTileByteCounts = 325,
  kSampleFormat = 339,
  kModelPixelScale = 33550,
  kModelTiepoint = 33922,
  kModelTransformation = 34264,
  kGeoKeyDirectory = 34735,
  kGeoDoubleParams = 34736,
  kGeoAsciiParams = 34737,
};

enum Type : std::uint16_t {
  kByte = 1, kAscii = 2, kShort = 3, kLong = 4, kRational = 5, kSByte = 6, kUndefined = 7,
  kSShort = 8, kSLong = 9, kSRational = 10, kFloat = 11, kDouble = 12,
};

inline std::size_t type_size(std::uint16_t type) {
  switch (type) {
    case kByte: case kAscii: case kSByte: case kUndefined: return 1;
    case kShort: case kSShort: return 2;
    case kLong: case kSLong: case kFloat: return 4;
    case kRational: case kSRational: case kDouble: return 8;
    default: return 0;
  }
}

inline bool is_geo_tag(std::uint16_t tag) {
  return tag == kModelPixelScale || tag == kModelTiepoint || tag == kModelTransformation ||
         tag == kGeoKeyDirectory || tag == kGeoDoubleParams || tag == kGeoAsciiParams;
}

inline constexpr std::uint32_t kRowsPerStripOut = 64;

}  // namespace tiff

/// One passthrough geo tag; `bytes` are little-endian regardless of source order.
struct GeoTag {
  std::uint16_t tag = 0;
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const GeoTag&, const GeoTag&) = default;
};

using GeoKeys = std::vector<GeoTag>;

struct TiffTagSet {
  std::uint32_t width = 0;
  std::uint32_t length = 0;
  std::uint16_t bits_per_sample = 0;
  std::uint16_t compression = 1;
  std::uint16_t photometric = 1;
  std::uint16_t samples_per_pixel = 1;
  std::uint16_t sample_format = 1;
  std::uint16_t planar_configuration = 1;
  std::uint32_t rows_per_strip = 0;
  std::vector<std::uint32_t> strip_offsets;
  std::vector<std::uint32_t> strip_byte_counts;
  std::string image_description;
  GeoKeys geo;

  std::uint64_t expected_bytes() const {
    return std::uint64_t{width} * length * samples_per_pixel * (bits_per_sample / 8);
  }
};

/// Decoded image: tags plus the strip bytes concatenated, pixel-interleaved,
/// converted to host-independent little-endian sample order.
struct TiffImage {
  TiffTagSet tags;
  std::vector<std::uint8_t> pixels;
};

namespace tiff_detail {

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool big_endian) : bytes_(bytes), big_(big_endian) {}

  void need(std::uint64_t offset, std::uint64_t len, const char* what) const {
    if (offset + len > bytes_.size()) {
      throw ParseError(ParseError::Kind::Truncated, std::string("TIFF truncated while reading ") + what);
    }
  }

  std::uint16_t u16(std::uint64_t off) const {
    need(off, 2, "u16");
    const auto* p = bytes_.data() + off;
    return big_ ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t u32(std::uint64_t off) const {
    need(off, 4, "u32");
    const auto* p = bytes_.data() + off;
    if (big_) {
      return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
    }
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  }

  /// Copies `count` elements of `elem` bytes each, reordered to little-endian.
  std::vector<std::uint8_t> le_elements(std::uint64_t off, std::uint64_t count, std::size_t elem) const {
    need(off, count * elem, "tag data");
    std::vector<std::uint8_t> out(bytes_.begin() + off, bytes_.begin() + off + count * elem);
    if (big_ && elem > 1) {
      for (std::size_t i = 0; i < out.size(); i += elem) std::reverse(out.begin() + i, out.begin() + i + elem);
    }
    return out;
  }

  std::span<const std::uint8_t> bytes() const { return bytes_; }

 private:
  std::span<const std::uint8_t> bytes_;
  bool big_;
};

struct Entry {
  std::uint16_t tag;
  std::uint16_t type;
  std::uint32_t count;
  std::uint64_t data_offset;  // inline values point at the entry's value field
};

inline std::vector<std::uint32_t> integers(const Reader& r, const Entry& e) {
  std::vector<std::uint32_t> out;
  out.reserve(e.count);
  for (std::uint32_t i = 0; i < e.count; ++i) {
    if (e.type == tiff::kShort) out.push_back(r.u16(e.data_offset + 2ull * i));
    else if (e.type == tiff::kLong) out.push_back(r.u32(e.data_offset + 4ull * i));
    else if (e.type == tiff::kByte) {
      r.need(e.data_offset + i, 1, "byte");
      out.push_back(r.bytes()[e.data_offset + i]);
    } else {
      throw ParseError(ParseError::Kind::MalformedHeader, "tag " + std::to_string(e.tag) + " has non-integer type");
    }
  }
  return out;
}

inline std::uint32_t single(const Reader& r, const Entry& e) {
  auto v = integers(r, e);
  if (v.empty()) throw ParseError(ParseError::Kind::MalformedHeader, "tag " + std::to_string(e.tag) + " is empty");
  for (auto x : v) {
    if (x != v.front()) {
      throw UnsupportedFeature("BitsPerSample", "per-sample values differ for tag " + std::to_string(e.tag));
    }
  }
  return v.front();
}

class Writer {
 public:
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void pad_even() {
    if (out_.size() % 2) out_.push_back(0);
  }
  std::size_t size() const { return out_.size(); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

inline std::vector<std::uint8_t> le_u32s(std::span<const std::uint32_t> values) {
  std::vector<std::uint8_t> out;
  for (auto v : values) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  return out;
}

inline std::vector<std::uint8_t> le_u16(std::uint16_t v) {
  return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
}

}  // namespace tiff_detail

inline TiffImage decode_tiff(std::span<const std::uint8_t> bytes) {
  using K = ParseError::Kind;
  using tiff_detail::Entry;
  if (bytes.size() < 8) throw ParseError(K::MalformedHeader, "TIFF header shorter than 8 bytes");
  bool big = false;
  if (bytes[0] == 'I' && bytes[1] == 'I') big = false;
  else if (bytes[0] == 'M' && bytes[1] == 'M') big = true;
  else throw ParseError(K::BadMagic, "missing TIFF byte-order mark");

  tiff_detail::Reader r(bytes, big);
  const std::uint16_t version = r.u16(2);
  if (version == 43) throw UnsupportedFeature("BigTIFF", "BigTIFF (version 43) is not supported");
  if (version != 42) throw ParseError(K::BadMagic, "TIFF version " + std::to_string(version) + " is not 42");

  const std::uint32_t ifd = r.u32(4);
  const std::uint16_t n = r.u16(ifd);
  r.need(ifd + 2, 12ull * n, "IFD");

  std::map<std::uint16_t, Entry> entries;
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::uint64_t at = ifd + 2 + 12ull * i;
    Entry e{r.u16(at), r.u16(at + 2), r.u32(at + 4), at + 8};
    const std::size_t elem = tiff::type_size(e.type);
    if (elem == 0) {
      // Unknown types (including BigTIFF LONG8) are skipped unless we need the tag.
      entries.emplace(e.tag, e);
      continue;
    }
    if (std::uint64_t{elem} * e.count > 4) e.data_offset = r.u32(at + 8);
    entries.emplace(e.tag, e);
  }

  auto find = [&](std::uint16_t tag) -> const Entry* {
    auto it = entries.find(tag);
    return it == entries.end() ? nullptr : &it->second;
  };
  auto require = [&](std::uint16_t tag, const char* name) -> const Entry& {
    const Entry* e = find(tag);
    if (!e) throw ParseError(K::MalformedHeader, std::string("required tag ") + name + " missing");
    return *e;
  };

  for (auto [tag, name] : {std::pair{tiff::kTileWidth, "TileWidth"}, std::pair{tiff::kTileLength, "TileLength"},
                           std::pair{tiff::kTileOffsets, "TileOffsets"}, std::pair{tiff::kTileByteCounts, "TileByteCounts"}}) {
    if (find(tag)) throw UnsupportedFeature(name, std::string("tiled TIFF (") + name + ") is not supported");
  }

  TiffImage img;
  TiffTagSet& t = img.tags;
  t.width = tiff_detail::single(r, require(tiff::kImageWidth, "ImageWidth"));
  t.length = tiff_detail::single(r, require(tiff::kImageLength, "ImageLength"));
  if (t.width == 0 || t.length == 0) throw ParseError(K::MalformedHeader, "TIFF has zero width or length");
  if (const Entry* e = find(tiff::kCompression)) t.compression = static_cast<std::uint16_t>(tiff_detail::single(r, *e));
  if (t.compression != 1) {
    throw UnsupportedFeature("Compression", "Compression=" + std::to_string(t.compression) + " is not supported");
  }
  if (const Entry* e = find(tiff::kSamplesPerPixel)) t.samples_per_pixel = static_cast<std::uint16_t>(tiff_detail::single(r, *e));
  t.bits_per_sample = 1;
  if (const Entry* e = find(tiff::kBitsPerSample)) t.bits_per_sample = static_cast<std::uint16_t>(tiff_detail::single(r, *e));
  if (const Entry* e = find(tiff::kSampleFormat)) t.sample_format = static_cast<std::uint16_t>(tiff_detail::single(r, *e));
  if (const Entry* e = find(tiff::kPhotometric)) t.photometric = static_cast<std::uint16_t>(tiff_detail::single(r, *e));
  if (const Entry* e = find(tiff::kPlanarConfiguration)) {
    t.planar_configuration = static_cast<std::uint16_t>(tiff_detail::single(r, *e));
  }
  if (t.planar_configuration != 1 && t.samples_per_pixel > 1) {
    throw UnsupportedFeature("PlanarConfiguration", "planar (separate) sample layout is not supported");
  }
  const bool is_u8 = t.bits_per_sample == 8 && t.sample_format == 1;
  const bool is_f32 = t.bits_per_sample == 32 && t.sample_format == 3;
  if (!is_u8 && !is_f32) {
    throw UnsupportedFeature("BitsPerSample", "BitsPerSample=" + std::to_string(t.bits_per_sample) +
                                                  " with SampleFormat=" + std::to_string(t.sample_format) +
                                                  " is not supported");
  }
  if (t.samples_per_pixel == 0) throw ParseError(K::MalformedHeader, "SamplesPerPixel is zero");

  t.rows_per_strip = t.length;
  if (const Entry* e = find(tiff::kRowsPerStrip)) t.rows_per_strip = std::min(tiff_detail::single(r, *e), t.length);
  t.strip_offsets = tiff_detail::integers(r, require(tiff::kStripOffsets, "StripOffsets"));
  t.strip_byte_counts = tiff_detail::integers(r, require(tiff::kStripByteCounts, "StripByteCounts"));
  if (t.strip_offsets.size() != t.strip_byte_counts.size() || t.strip_offsets.empty()) {
    throw ParseError(K::MalformedHeader, "StripOffsets and StripByteCounts disagree in length");
  }
  std::uint64_t total = 0;
  for (auto c : t.strip_byte_counts) total += c;
  if (total != t.expected_bytes()) {
    throw ParseError(K::MalformedHeader, "strip byte counts sum to " + std::to_string(total) + ", expected " +
                                             std::to_string(t.expected_bytes()));
  }

  if (const Entry* e = find(tiff::kImageDescription); e && e->type == tiff::kAscii) {
    auto raw = r.le_elements(e->data_offset, e->count, 1);
    t.image_description.assign(raw.begin(), std::find(raw.begin(), raw.end(), std::uint8_t{0}));
  }
  for (const auto& [tag, e] : entries) {
    if (!tiff::is_geo_tag(tag)) continue;
    const std::size_t elem = tiff::type_size(e.type);
    if (elem == 0) throw ParseError(K::MalformedHeader, "geo tag " + std::to_string(tag) + " has unknown type");
    t.geo.push_back(GeoTag{tag, e.type, e.count, r.le_elements(e.data_offset, e.count, elem)});
  }

  img.pixels.reserve(total);
  for (std::size_t s = 0; s < t.strip_offsets.size(); ++s) {
    r.need(t.strip_offsets[s], t.strip_byte_counts[s], "strip data");
    auto strip = bytes.subspan(t.strip_offsets[s], t.strip_byte_counts[s]);
    img.pixels.insert(img.pixels.end(), strip.begin(), strip.end());
  }
  if (big && is_f32) {
    for (std::size_t i = 0; i < img.pixels.size(); i += 4) std::reverse(img.pixels.begin() + i, img.pixels.begin() + i + 4);
  }
  return img;
}

inline TiffImage read_tiff(const std::filesystem::path& path) { return decode_tiff(read_file_bytes(path)); }

/// Legend is stored as JSON in ImageDescription: {"legend": [...]}.
inline std::vector<std::uint8_t> encode_label_tiff(const LabelMap& m, const GeoKeys& geo = {}) {
  namespace td = tiff_detail;
  validate(m);
  if (m.width() > UINT32_MAX || m.height() > UINT32_MAX) throw CapacityError("label map too large for classic TIFF");
  if (m.size() > 0xFFFF0000ull) throw CapacityError("label map exceeds classic TIFF 4 GB offsets");

  const auto width = static_cast<std::uint32_t>(m.width());
  const auto length = static_cast<std::uint32_t>(m.height());
  const std::uint32_t rps = std::min(tiff::kRowsPerStripOut, length);
  const std::uint32_t strips = (length + rps - 1) / rps;

  std::string description = nlohmann::json{{"legend", m.legend}}.dump();
  std::vector<std::uint8_t> desc_bytes(description.begin(), description.end());
  desc_bytes.push_back(0);

  struct Out {
    std::uint16_t tag, type;
    std::uint32_t count;
    std::vector<std::uint8_t> data;  // little-endian value bytes
  };
  std::vector<Out> tags;
  auto long1 = [](std::uint32_t v) { return td::le_u32s(std::span<const std::uint32_t>(&v, 1)); };
  std::vector<std::uint32_t> offsets(strips, 0), counts(strips, 0);
  for (std::uint32_t s = 0; s < strips; ++s) counts[s] = std::min(rps, length - s * rps) * width;

  tags.push_back({tiff::kImageWidth, tiff::kLong, 1, long1(width)});
  tags.push_back({tiff::kImageLength, tiff::kLong, 1, long1(length)});
  tags.push_back({tiff::kBitsPerSample, tiff::kShort, 1, td::le_u16(8)});
  tags.push_back({tiff::kCompression, tiff::kShort, 1, td::le_u16(1)});
  tags.push_back({tiff::kPhotometric, tiff::kShort, 1, td::le_u16(1)});
  tags.push_back({tiff::kImageDescription, tiff::kAscii, static_cast<std::uint32_t>(desc_bytes.size()), desc_bytes});
  tags.push_back({tiff::kStripOffsets, tiff::kLong, strips, td::le_u32s(offsets)});
  tags.push_back({tiff::kSamplesPerPixel, tiff::kShort, 1, td::le_u16(1)});
  tags.push_back({tiff::kRowsPerStrip, tiff::kLong, 1, long1(rps)});
  tags.push_back({tiff::kStripByteCounts, tiff::kLong, strips, td::le_u32s(counts)});
  tags.push_back({tiff::kPlanarConfiguration, tiff::kShort, 1, td::le_u16(1)});
  tags.push_back({tiff::kSampleFormat, tiff::kShort, 1, td::le_u16(1)});
  for (const GeoTag& g : geo) {
    if (!tiff::is_geo_tag(g.tag) || g.bytes.size() != tiff::type_size(g.type) * g.count) {
      throw InvalidInput("malformed geo passthrough tag " + std::to_string(g.tag));
    }
    tags.push_back({g.tag, g.type, g.count, g.bytes});
  }
  std::stable_sort(tags.begin(), tags.end(), [](const Out& a, const Out& b) { return a.tag < b.tag; });

  // Layout: header | IFD | out-of-line tag data | strips.
  const std::size_t ifd_size = 2 + 12 * tags.size() + 4;
  std::size_t cursor = 8 + ifd_size;
  std::vector<std::size_t> data_at(tags.size(), 0);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].data.size() > 4) {
      data_at[i] = cursor;
      cursor += tags[i].data.size() + (tags[i].data.size() % 2);
    }
  }
  for (std::uint32_t s = 0; s < strips; ++s) {
    offsets[s] = static_cast<std::uint32_t>(cursor);
    cursor += counts[s];
  }
  for (auto& t : tags) {
    if (t.tag == tiff::kStripOffsets) t.data = td::le_u32s(offsets);
  }

  td::Writer w;
  w.buffer().reserve(cursor);
  w.bytes(std::vector<std::uint8_t>{'I', 'I'});
  w.u16(42);
  w.u32(8);
  w.u16(static_cast<std::uint16_t>(tags.size()));
  for (std::size_t i = 0; i < tags.size(); ++i) {
    w.u16(tags[i].tag);
    w.u16(tags[i].type);
    w.u32(tags[i].count);
    if (tags[i].data.size() > 4) {
      w.u32(static_cast<std::uint32_t>(data_at[i]));
    } else {
      std::array<std::uint8_t, 4> inline_value{};
      std::copy(tags[i].data.begin(), tags[i].data.end(), inline_value.begin());
      w.bytes(inline_value);
    }
  }
  w.u32(0);
  for (const auto& t : tags) {
    if (t.data.size() > 4) {
      w.bytes(t.data);
      w.pad_even();
    }
  }
  w.bytes(m.values());

  std::vector<std::uint8_t> out = std::move(w.buffer());
  const TiffImage check = decode_tiff(out);
  if (check.tags.expected_bytes() != m.size()) throw Error("TIFF writer produced inconsistent strip byte counts");
  return out;
}

inline void write_label_tiff(const LabelMap& m, const std::filesystem::path& path, const GeoKeys& geo = {}) {
  write_file_bytes(path, encode_label_tiff(m, geo));
}

struct GeoLabelMap {
  LabelMap labels;
  GeoKeys geo;
};

inline GeoLabelMap decode_label_tiff(std::span<const std::uint8_t> bytes) {
  TiffImage img = decode_tiff(bytes);
  const TiffTagSet& t = img.tags;
  if (t.bits_per_sample != 8 || t.sample_format != 1) {
    throw UnsupportedFeature("BitsPerSample", "label TIFFs must be 8-bit unsigned");
  }
  if (t.samples_per_pixel != 1) throw UnsupportedFeature("SamplesPerPixel", "label TIFFs must have one sample");

  std::vector<std::string> legend;
  if (!t.image_description.empty()) {
    auto doc = nlohmann::json::parse(t.image_description, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.contains("legend") && doc["legend"].is_array()) {
      legend = doc["legend"].get<std::vector<std::string>>();
    }
  }
  std::uint8_t hi = 0;
  for (auto v : img.pixels) hi = std::max(hi, v);
  if (legend.size() <= hi) {
    auto extra = default_legend(std::size_t{hi} + 1);
    for (std::size_t i = legend.size(); i < extra.size(); ++i) legend.push_back(extra[i]);
  }
  GeoLabelMap out{LabelMap(t.length, t.width, std::move(img.pixels), std::move(legend)), t.geo};
  return out;
}

inline GeoLabelMap read_label_geotiff(const std::filesystem::path& path) {
  return decode_label_tiff(read_file_bytes(path));
}

inline LabelMap read_label_tiff(const std::filesystem::path& path) { return read_label_geotiff(path).labels; }

/// Any supported TIFF as floats, de-interleaved to band-sequential order.
inline MultiBandRaster read_raster_tiff(const std::filesystem::path& path) {
  const TiffImage img = read_tiff(path);
  const TiffTagSet& t = img.tags;
  const std::size_t spp = t.samples_per_pixel;
  MultiBandRaster x(t.length, t.width, spp);
  const std::size_t pixels = x.pixels();
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t b = 0; b < spp; ++b) {
      const std::size_t k = i * spp + b;
      if (t.bits_per_sample == 8) {
        x.at_pixel(i, b) = img.pixels[k];
      } else {
        std::uint32_t bits = 0;
        for (int j = 0; j < 4; ++j) bits |= std::uint32_t{img.pixels[4 * k + j]} << (8 * j);
        x.at_pixel(i, b) = std::bit_cast<float>(bits);
      }
    }
  }
  return x;
}

}  // namespace fmlc
