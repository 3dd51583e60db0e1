#pragma once

// Raw-tensor container (`.fmt`):
//   8 bytes   magic "FMLCRAS1"
//   4 bytes   little-endian u32 header length N
//   N bytes   UTF-8 JSON header: dtype ("f32"|"u8"), shape [H,W,C], order ("bsq"),
//             optional bands (names), legend (names indexed by class id), nodata
//   payload   little-endian values, band-sequential, row-major
//   4 bytes   little-endian CRC32 (IEEE) of the payload bytes

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fmlc/raster.hpp"

namespace fmlc {

namespace tensor_detail {

inline constexpr std::string_view kMagic = "FMLCRAS1";

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, bytes.data() + offset, static_cast<uInt>(n));
    offset += n;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::uint8_t> frame(const nlohmann::json& header, std::span<const std::uint8_t> payload) {
  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(kMagic.size() + 4 + text.size() + payload.size() + 4);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32(out, crc32_of(payload));
  return out;
}

inline std::vector<std::uint8_t> f32_payload(std::span<const float> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

}  // namespace tensor_detail

/// Decoded container: header plus exactly one populated payload vector.
struct TensorBlob {
  std::string dtype;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<std::string> band_names;
  std::vector<std::string> legend;
  std::optional<float> nodata;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;
};

inline std::vector<std::uint8_t> encode_tensor(const MultiBandRaster& x) {
  nlohmann::json header;
  header["dtype"] = "f32";
  header["order"] = "bsq";
  header["shape"] = {x.height(), x.width(), x.bands()};
  if (!x.band_names.empty()) header["bands"] = x.band_names;
  if (x.nodata) {
    if (std::isnan(*x.nodata)) header["nodata"] = "nan";
    else header["nodata"] = *x.nodata;
  }
  return tensor_detail::frame(header, tensor_detail::f32_payload(x.values()));
}

inline std::vector<std::uint8_t> encode_tensor(const LabelMap& m) {
  validate(m);
  nlohmann::json header;
  header["dtype"] = "u8";
  header["order"] = "bsq";
  header["shape"] = {m.height(), m.width(), std::size_t{1}};
  header["legend"] = m.legend;
  return tensor_detail::frame(header, m.values());
}

inline TensorBlob decode_tensor(std::span<const std::uint8_t> bytes) {
  using tensor_detail::kMagic;
  using K = ParseError::Kind;
  if (bytes.size() < kMagic.size() ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw ParseError(K::BadMagic, "not an FMLCRAS1 tensor file");
  }
  if (bytes.size() < kMagic.size() + 4) throw ParseError(K::Truncated, "file ends inside the header length");
  const std::size_t header_len = tensor_detail::get_u32(bytes.data() + kMagic.size());
  const std::size_t header_start = kMagic.size() + 4;
  if (bytes.size() < header_start + header_len) throw ParseError(K::Truncated, "file ends inside the JSON header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + header_start, bytes.begin() + header_start + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(K::MalformedHeader, std::string("header is not valid JSON: ") + e.what());
  }

  TensorBlob blob;
  try {
    blob.dtype = header.at("dtype").get<std::string>();
    if (header.at("order").get<std::string>() != "bsq") throw ParseError(K::MalformedHeader, "order must be \"bsq\"");
    const auto shape = header.at("shape").get<std::vector<std::int64_t>>();
    if (shape.size() != 3 || shape[0] < 1 || shape[1] < 1 || shape[2] < 1) {
      throw ParseError(K::MalformedHeader, "shape must be three positive integers [H,W,C]");
    }
    blob.height = static_cast<std::size_t>(shape[0]);
    blob.width = static_cast<std::size_t>(shape[1]);
    blob.bands = static_cast<std::size_t>(shape[2]);
    if (header.contains("bands")) blob.band_names = header["bands"].get<std::vector<std::string>>();
    if (header.contains("legend")) blob.legend = header["legend"].get<std::vector<std::string>>();
    if (header.contains("nodata")) {
      const auto& nd = header["nodata"];
      if (nd.is_string() && nd.get<std::string>() == "nan") blob.nodata = std::numeric_limits<float>::quiet_NaN();
      else blob.nodata = nd.get<float>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(K::MalformedHeader, std::string("bad header field: ") + e.what());
  }

  std::size_t elem = 0;
  if (blob.dtype == "f32") elem = 4;
  else if (blob.dtype == "u8") elem = 1;
  else throw ParseError(K::MalformedHeader, "unsupported dtype \"" + blob.dtype + "\"");

  const std::size_t count = blob.height * blob.width * blob.bands;
  const std::size_t payload_start = header_start + header_len;
  const std::size_t payload_len = count * elem;
  if (bytes.size() < payload_start + payload_len + 4) {
    throw ParseError(K::Truncated, "payload truncated: need " + std::to_string(payload_len + 4) + " bytes, have " +
                                       std::to_string(bytes.size() - payload_start));
  }
  if (bytes.size() != payload_start + payload_len + 4) throw ParseError(K::MalformedHeader, "trailing bytes after CRC");

  const auto payload = bytes.subspan(payload_start, payload_len);
  const std::uint32_t stored = tensor_detail::get_u32(bytes.data() + payload_start + payload_len);
  if (stored != tensor_detail::crc32_of(payload)) throw ParseError(K::ChecksumMismatch, "payload CRC32 mismatch");

  if (elem == 4) {
    blob.f32.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      blob.f32[i] = std::bit_cast<float>(tensor_detail::get_u32(payload.data() + 4 * i));
    }
  } else {
    blob.u8.assign(payload.begin(), payload.end());
  }
  return blob;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline TensorBlob read_tensor_blob(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

/// Reads any `.fmt` file as floats; u8 payloads are widened losslessly.
inline MultiBandRaster read_tensor(const std::filesystem::path& path) {
  TensorBlob blob = read_tensor_blob(path);
  std::vector<float> data = std::move(blob.f32);
  if (blob.dtype == "u8") data.assign(blob.u8.begin(), blob.u8.end());
  MultiBandRaster x(blob.height, blob.width, blob.bands, std::move(data));
  x.band_names = std::move(blob.band_names);
  x.nodata = blob.nodata;
  return x;
}

inline void write_tensor(const std::filesystem::path& path, const MultiBandRaster& x) {
  write_file_bytes(path, encode_tensor(x));
}

inline void write_tensor(const std::filesystem::path& path, const Grid<float>& g) {
  write_tensor(path, MultiBandRaster(g));
}

inline LabelMap labels_from_blob(TensorBlob blob) {
  if (blob.dtype != "u8" || blob.bands != 1) {
    throw InvalidInput("label tensors must be u8 with a single band");
  }
  std::vector<std::string> legend = std::move(blob.legend);
  if (legend.empty()) {
    std::uint8_t hi = 0;
    for (std::uint8_t v : blob.u8) hi = std::max(hi, v);
    legend = default_legend(std::size_t{hi} + 1);
  }
  LabelMap m(blob.height, blob.width, std::move(blob.u8), std::move(legend));
  validate(m);
  return m;
}

inline LabelMap read_labels(const std::filesystem::path& path) { return labels_from_blob(read_tensor_blob(path)); }

inline void write_labels(const std::filesystem::path& path, const LabelMap& m) {
  write_file_bytes(path, encode_tensor(m));
}

}  // namespace fmlc
