#pragma once
// Dense row-major 2D and channel-major 3D containers shared by every module.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace medirl {

/// A grid coordinate. y grows southwards, x grows eastwards.
struct Cell {
  int y = 0;
  int x = 0;

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

struct GridSpec {
  int height = 32;
  int width = 32;
  double cell_size = 0.5;  // meters per cell

  [[nodiscard]] std::size_t cells() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  [[nodiscard]] bool contains(Cell c) const {
    return c.y >= 0 && c.x >= 0 && c.y < height && c.x < width;
  }
  [[nodiscard]] std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.x);
  }
  [[nodiscard]] Cell cell(std::size_t idx) const {
    return {static_cast<int>(idx / static_cast<std::size_t>(width)),
            static_cast<int>(idx % static_cast<std::size_t>(width))};
  }

  void validate() const {
    if (height < 2 || width < 2)
      throw std::invalid_argument("GridSpec: height and width must be >= 2");
    if (!(cell_size > 0.0))
      throw std::invalid_argument("GridSpec: cell_size must be > 0");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline int chebyshev(Cell a, Cell b) {
  return std::max(std::abs(a.y - b.y), std::abs(a.x - b.x));
}

/// H x W array of T, row-major.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height),
        width_(width),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}
  explicit Grid(const GridSpec& spec, T fill = T{}) : Grid(spec.height, spec.width, fill) {}

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  T& operator()(int y, int x) { return data_[offset(y, x)]; }
  const T& operator()(int y, int x) const { return data_[offset(y, x)]; }
  T& operator[](Cell c) { return (*this)(c.y, c.x); }
  const T& operator[](Cell c) const { return (*this)(c.y, c.x); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] bool same_shape(const GridSpec& spec) const {
    return height_ == spec.height && width_ == spec.width;
  }
  template <typename U>
  [[nodiscard]] bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  [[nodiscard]] std::size_t offset(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// C x H x W array of doubles, channel-major.
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, double fill = 0.0)
      : channels(c),
        height(h),
        width(w),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
                 static_cast<std::size_t>(w),
             fill) {}

  [[nodiscard]] std::size_t plane() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  double& operator()(int c, int y, int x) {
    return data[static_cast<std::size_t>(c) * plane() +
                static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }
  double operator()(int c, int y, int x) const {
    return data[static_cast<std::size_t>(c) * plane() +
                static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }
  [[nodiscard]] bool same_shape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

}  // namespace medirl
