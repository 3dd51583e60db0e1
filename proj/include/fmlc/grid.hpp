#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fmlc/error.hpp"

namespace fmlc {

/// Dense H x W x B grid stored band-sequential (BSQ), row-major within a band.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(std::size_t height, std::size_t width, std::size_t bands, T fill = T{})
      : height_(height), width_(width), bands_(bands), data_(height * width * bands, fill) {
    check_shape();
  }

  Grid(std::size_t height, std::size_t width, std::size_t bands, std::vector<T> data)
      : height_(height), width_(width), bands_(bands), data_(std::move(data)) {
    check_shape();
    if (data_.size() != height_ * width_ * bands_) {
      throw InvalidInput("grid payload has " + std::to_string(data_.size()) + " values, expected " +
                         std::to_string(height_ * width_ * bands_));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t row, std::size_t col, std::size_t band = 0) noexcept {
    return data_[band * pixels() + row * width_ + col];
  }
  const T& operator()(std::size_t row, std::size_t col, std::size_t band = 0) const noexcept {
    return data_[band * pixels() + row * width_ + col];
  }

  /// Value at flat pixel index `pixel` (row * width + col) of `band`.
  T& at_pixel(std::size_t pixel, std::size_t band = 0) noexcept { return data_[band * pixels() + pixel]; }
  const T& at_pixel(std::size_t pixel, std::size_t band = 0) const noexcept {
    return data_[band * pixels() + pixel];
  }

  std::span<T> band(std::size_t b) noexcept { return {data_.data() + b * pixels(), pixels()}; }
  std::span<const T> band(std::size_t b) const noexcept { return {data_.data() + b * pixels(), pixels()}; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_extent(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  template <typename U>
  bool same_extent(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  void check_shape() const {
    if (height_ == 0 || width_ == 0 || bands_ == 0) {
      throw InvalidInput("grid dimensions must be positive, got " + std::to_string(height_) + "x" +
                         std::to_string(width_) + "x" + std::to_string(bands_));
    }
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t bands_ = 0;
  std::vector<T> data_;
};

template <typename U, typename T>
void require_same_extent(const Grid<U>& a, const Grid<T>& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidInput(std::string(what) + ": extent mismatch " + std::to_string(a.height()) + "x" +
                       std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                       std::to_string(b.width()));
  }
}

}  // namespace fmlc
