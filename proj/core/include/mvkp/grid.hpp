#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "mvkp/error.hpp"

namespace mvkp {

// Resolution of predicted grids and of rendered images.
inline constexpr int kGridSize = 32;
inline constexpr int kImageSize = 2 * kGridSize;

// Grid convention shared by every module: origin at the top-left cell,
// x = column, y = row, cell centers at integer coordinates. Storage is one
// contiguous row-major plane per channel.
struct GridShape {
  int width = 0;
  int height = 0;
  int channels = 0;

  std::size_t plane_size() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t size() const { return plane_size() * static_cast<std::size_t>(channels); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

// Read-only view of one channel.
struct ConstPlane {
  int width = 0;
  int height = 0;
  std::span<const double> values;

  std::size_t size() const { return values.size(); }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Owning single-channel buffer.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  ConstPlane view() const { return {width, height, values}; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

template <typename Tag>
class Grid {
 public:
  Grid() = default;
  explicit Grid(GridShape shape, double fill = 0.0) : shape_(shape), values_(shape.size(), fill) {
    require(shape.width > 0 && shape.height > 0 && shape.channels > 0,
            ErrorCode::kInvalidArgument, "grid dimensions must be positive");
  }
  Grid(int width, int height, int channels, double fill = 0.0)
      : Grid(GridShape{width, height, channels}, fill) {}

  const GridShape& shape() const { return shape_; }
  int width() const { return shape_.width; }
  int height() const { return shape_.height; }
  int channels() const { return shape_.channels; }

  double& at(int x, int y, int c) { return values_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return values_[index(x, y, c)]; }

  std::span<double> plane(int c) {
    return std::span<double>(values_).subspan(static_cast<std::size_t>(c) * shape_.plane_size(),
                                               shape_.plane_size());
  }
  std::span<const double> plane(int c) const {
    return std::span<const double>(values_).subspan(
        static_cast<std::size_t>(c) * shape_.plane_size(), shape_.plane_size());
  }
  ConstPlane plane_view(int c) const { return {shape_.width, shape_.height, plane(c)}; }

  void set_plane(int c, std::span<const double> values) {
    require(values.size() == shape_.plane_size(), ErrorCode::kShapeMismatch,
            "plane size does not match grid");
    std::copy(values.begin(), values.end(), plane(c).begin());
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(c) * shape_.height + static_cast<std::size_t>(y)) *
               shape_.width +
           static_cast<std::size_t>(x);
  }

  GridShape shape_;
  std::vector<double> values_;
};

// Per-channel normalized probability grid (W x H x C).
using Heatmap = Grid<struct HeatmapTag>;
// Per-pixel visibility probability in [0,1]; not normalized.
using VisibilityMap = Grid<struct VisibilityMapTag>;
// Carrier for d(loss)/d(grid).
using GradientGrid = Grid<struct GradientGridTag>;
// Color image, channels are R, G, B planes in [0,1].
using Image = Grid<struct ImageTag>;
// Dense flow, channel 0 = u (x displacement), channel 1 = v (y displacement).
using FlowField = Grid<struct FlowFieldTag>;

template <typename To, typename From>
To grid_cast(const From& from) {
  To to(from.shape());
  std::copy(from.values().begin(), from.values().end(), to.values().begin());
  return to;
}

template <typename Tag>
Grid<Tag> single_channel(const Grid<Tag>& grid, int c) {
  Grid<Tag> out(grid.width(), grid.height(), 1);
  out.set_plane(0, grid.plane(c));
  return out;
}

template <typename Tag>
Grid<Tag> from_plane(const Plane& plane) {
  Grid<Tag> out(plane.width, plane.height, 1);
  out.set_plane(0, plane.values);
  return out;
}

double plane_sum(std::span<const double> values);

// Divides by the sum in place; returns the sum that was removed.
double normalize_in_place(std::span<double> values);

// Binary grid dump: int32 W, H, C (little-endian) followed by float32 values
// in storage order (channel planes, each row-major).
void write_grid_dump(const std::filesystem::path& path, const GridShape& shape,
                     std::span<const double> values);

struct GridDump {
  GridShape shape;
  std::vector<double> values;
};

GridDump read_grid_dump(const std::filesystem::path& path);

template <typename Tag>
void write_grid(const std::filesystem::path& path, const Grid<Tag>& grid) {
  write_grid_dump(path, grid.shape(), grid.values());
}

template <typename GridT>
GridT read_grid(const std::filesystem::path& path) {
  GridDump dump = read_grid_dump(path);
  GridT grid(dump.shape);
  std::copy(dump.values.begin(), dump.values.end(), grid.values().begin());
  return grid;
}

}  // namespace mvkp
