#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mvkp/geometry.hpp"
#include "mvkp/grid.hpp"

namespace mvkp {

// Soft labels used for ground-truth visibility; keep every KL finite.
inline constexpr double kVisibleLabel = 0.98;
inline constexpr double kOccludedLabel = 0.02;

struct Sphere {
  Eigen::Vector3d center;
  double radius;
};

struct Box {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
};

struct OccluderSet {
  std::vector<Sphere> spheres;
  std::vector<Box> boxes;

  bool empty() const { return spheres.empty() && boxes.empty(); }
  // Throws kInvalidArgument on non-positive radii or inverted boxes.
  void validate() const;
  bool contains(const Eigen::Vector3d& point) const;
};

struct PosteriorResult {
  Heatmap posterior;
  // Channel whose product vanished everywhere and fell back to P.
  std::vector<bool> fallback;
};

// xi = P * V per cell, renormalized per channel.
PosteriorResult posterior(const Heatmap& p, const VisibilityMap& v);

using CameraPair = std::pair<int, int>;

// Unordered pairs i < j with |C_i - C_j| < eps_c.
std::vector<CameraPair> adjacency(std::span<const Camera> cameras, double eps_c);

struct VisibilityLossResult {
  double value = 0.0;
  std::vector<std::vector<double>> grads;  // one per view
};

// sum over pairs of (max V_i - max V_j)^2 for one channel.
VisibilityLossResult visibility_loss(std::span<const ConstPlane> views,
                                     std::span<const CameraPair> pairs);

enum class RaycastMode { kAnalytic, kVoxel };

// Occupancy grid over the occluders' bounding box; a voxel is occupied when
// its center lies inside any primitive.
class VoxelGrid {
 public:
  VoxelGrid(const OccluderSet& occluders, double voxel_size);

  double voxel_size() const { return voxel_size_; }
  const std::array<int, 3>& dims() const { return dims_; }
  bool occupied(int x, int y, int z) const;
  // True when the open segment from `from` to `to` passes an occupied voxel
  // other than the one containing `to`.
  bool segment_blocked(const Eigen::Vector3d& from, const Eigen::Vector3d& to) const;

 private:
  std::array<int, 3> voxel_of(const Eigen::Vector3d& p) const;

  double voxel_size_;
  Eigen::Vector3d origin_;
  std::array<int, 3> dims_{0, 0, 0};
  std::vector<bool> cells_;
};

// True when the open segment (a, b) passes through the interior of an
// occluder; symmetric in a and b.
bool segment_blocked(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                     const OccluderSet& occluders);

// 1 when the keypoint is seen by the camera, 0 when occluded.
int raycast_visibility(const Eigen::Vector3d& point, const Camera& camera,
                       const OccluderSet& occluders, RaycastMode mode = RaycastMode::kAnalytic,
                       double voxel_size = 0.0);
int raycast_visibility(const Eigen::Vector3d& point, const Camera& camera,
                       const VoxelGrid& voxels);

// Constant-per-channel visibility label grid; the extra last channel is the
// background and is always visible.
VisibilityMap render_visibility_label(std::span<const Eigen::Vector3d> keypoints,
                                      const Camera& camera, const OccluderSet& occluders);

}  // namespace mvkp
