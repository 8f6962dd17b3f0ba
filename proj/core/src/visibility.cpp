#include "mvkp/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvkp/error.hpp"

namespace mvkp {
namespace {

bool segment_hits_sphere(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Sphere& s) {
  const Eigen::Vector3d d = b - a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0.0 ? (s.center - a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * d - s.center).norm() < s.radius;
}

bool segment_hits_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Box& box) {
  const Eigen::Vector3d d = b - a;
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (d(k) == 0.0) {
      if (!(a(k) > box.min(k) && a(k) < box.max(k))) return false;
      continue;
    }
    double t0 = (box.min(k) - a(k)) / d(k);
    double t1 = (box.max(k) - a(k)) / d(k);
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  return std::max(t_enter, 0.0) < std::min(t_exit, 1.0);
}

// Parametric overlap of the segment a + t (b - a), t in [0,1], with an
// axis-aligned box; returns false when they do not meet.
bool clip_to_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& lo,
                 const Eigen::Vector3d& hi, double& t_in, double& t_out) {
  const Eigen::Vector3d d = b - a;
  t_in = 0.0;
  t_out = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (d(k) == 0.0) {
      if (a(k) < lo(k) || a(k) > hi(k)) return false;
      continue;
    }
    double t0 = (lo(k) - a(k)) / d(k);
    double t1 = (hi(k) - a(k)) / d(k);
    if (t0 > t1) std::swap(t0, t1);
    t_in = std::max(t_in, t0);
    t_out = std::min(t_out, t1);
  }
  return t_in <= t_out;
}

}  // namespace

void OccluderSet::validate() const {
  for (const Sphere& s : spheres) {
    require(s.radius > 0.0, ErrorCode::kInvalidArgument, "sphere radius must be positive");
  }
  for (const Box& b : boxes) {
    require((b.min.array() < b.max.array()).all(), ErrorCode::kInvalidArgument,
            "box min must be below max on every axis");
  }
}

bool OccluderSet::contains(const Eigen::Vector3d& point) const {
  for (const Sphere& s : spheres) {
    if ((point - s.center).norm() < s.radius) return true;
  }
  for (const Box& b : boxes) {
    if ((point.array() > b.min.array()).all() && (point.array() < b.max.array()).all()) {
      return true;
    }
  }
  return false;
}

PosteriorResult posterior(const Heatmap& p, const VisibilityMap& v) {
  require(p.shape() == v.shape(), ErrorCode::kShapeMismatch,
          "heatmap and visibility map differ in shape");
  PosteriorResult result{Heatmap(p.shape()), std::vector<bool>(p.channels(), false)};
  for (int c = 0; c < p.channels(); ++c) {
    const auto pc = p.plane(c);
    const auto vc = v.plane(c);
    auto out = result.posterior.plane(c);
    for (std::size_t k = 0; k < pc.size(); ++k) out[k] = pc[k] * vc[k];
    if (normalize_in_place(out) <= 0.0) {
      std::copy(pc.begin(), pc.end(), out.begin());
      result.fallback[c] = true;
    }
  }
  return result;
}

std::vector<CameraPair> adjacency(std::span<const Camera> cameras, double eps_c) {
  require(eps_c > 0.0, ErrorCode::kInvalidArgument, "adjacency radius must be positive");
  std::vector<CameraPair> pairs;
  for (int i = 0; i < static_cast<int>(cameras.size()); ++i) {
    for (int j = i + 1; j < static_cast<int>(cameras.size()); ++j) {
      if ((cameras[i].center() - cameras[j].center()).norm() < eps_c) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

VisibilityLossResult visibility_loss(std::span<const ConstPlane> views,
                                     std::span<const CameraPair> pairs) {
  VisibilityLossResult result;
  result.grads.reserve(views.size());
  std::vector<double> maxima(views.size());
  std::vector<std::size_t> argmax(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    result.grads.emplace_back(views[v].values.size(), 0.0);
    const auto it = std::max_element(views[v].values.begin(), views[v].values.end());
    maxima[v] = *it;
    argmax[v] = static_cast<std::size_t>(it - views[v].values.begin());
  }
  for (const auto& [i, j] : pairs) {
    require(i >= 0 && j >= 0 && i < static_cast<int>(views.size()) &&
                j < static_cast<int>(views.size()),
            ErrorCode::kInvalidArgument, "adjacency pair refers to a missing view");
    const double diff = maxima[i] - maxima[j];
    result.value += diff * diff;
    result.grads[i][argmax[i]] += 2.0 * diff;
    result.grads[j][argmax[j]] -= 2.0 * diff;
  }
  return result;
}

VoxelGrid::VoxelGrid(const OccluderSet& occluders, double voxel_size) : voxel_size_(voxel_size) {
  require(voxel_size > 0.0, ErrorCode::kInvalidArgument, "voxel size must be positive");
  occluders.validate();
  if (occluders.empty()) {
    origin_.setZero();
    return;
  }
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const Sphere& s : occluders.spheres) {
    lo = lo.cwiseMin(s.center - Eigen::Vector3d::Constant(s.radius));
    hi = hi.cwiseMax(s.center + Eigen::Vector3d::Constant(s.radius));
  }
  for (const Box& b : occluders.boxes) {
    lo = lo.cwiseMin(b.min);
    hi = hi.cwiseMax(b.max);
  }
  origin_ = lo - Eigen::Vector3d::Constant(voxel_size);
  for (int k = 0; k < 3; ++k) {
    dims_[k] = static_cast<int>(std::ceil((hi(k) - lo(k)) / voxel_size)) + 2;
  }
  cells_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], false);
  for (int z = 0; z < dims_[2]; ++z) {
    for (int y = 0; y < dims_[1]; ++y) {
      for (int x = 0; x < dims_[0]; ++x) {
        const Eigen::Vector3d center = origin_ + voxel_size * Eigen::Vector3d(x + 0.5, y + 0.5, z + 0.5);
        cells_[(static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x] =
            occluders.contains(center);
      }
    }
  }
}

bool VoxelGrid::occupied(int x, int y, int z) const {
  if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) return false;
  return cells_[(static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x];
}

std::array<int, 3> VoxelGrid::voxel_of(const Eigen::Vector3d& p) const {
  std::array<int, 3> v;
  for (int k = 0; k < 3; ++k) v[k] = static_cast<int>(std::floor((p(k) - origin_(k)) / voxel_size_));
  return v;
}

bool VoxelGrid::segment_blocked(const Eigen::Vector3d& from, const Eigen::Vector3d& to) const {
  if (cells_.empty()) return false;
  const Eigen::Vector3d hi =
      origin_ + voxel_size_ * Eigen::Vector3d(dims_[0], dims_[1], dims_[2]);
  double t_in = 0.0, t_out = 1.0;
  if (!clip_to_box(from, to, origin_, hi, t_in, t_out)) return false;

  // Amanatides-Woo traversal from the clipped entry point.
  const Eigen::Vector3d d = to - from;
  const Eigen::Vector3d entry = from + t_in * d;
  std::array<int, 3> cell = voxel_of(entry);
  for (int k = 0; k < 3; ++k) cell[k] = std::clamp(cell[k], 0, dims_[k] - 1);
  const std::array<int, 3> target = voxel_of(to);

  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  for (int k = 0; k < 3; ++k) {
    if (d(k) > 0.0) {
      step[k] = 1;
      t_max[k] = (origin_(k) + (cell[k] + 1) * voxel_size_ - from(k)) / d(k);
      t_delta[k] = voxel_size_ / d(k);
    } else if (d(k) < 0.0) {
      step[k] = -1;
      t_max[k] = (origin_(k) + cell[k] * voxel_size_ - from(k)) / d(k);
      t_delta[k] = -voxel_size_ / d(k);
    } else {
      step[k] = 0;
      t_max[k] = std::numeric_limits<double>::infinity();
      t_delta[k] = std::numeric_limits<double>::infinity();
    }
  }
  while (true) {
    if (cell != target && occupied(cell[0], cell[1], cell[2])) return true;
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] > t_out) return false;
    cell[axis] += step[axis];
    if (cell[axis] < 0 || cell[axis] >= dims_[axis]) return false;
    t_max[axis] += t_delta[axis];
  }
}

bool segment_blocked(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                     const OccluderSet& occluders) {
  for (const Sphere& s : occluders.spheres) {
    if (segment_hits_sphere(a, b, s)) return true;
  }
  for (const Box& box : occluders.boxes) {
    if (segment_hits_box(a, b, box)) return true;
  }
  return false;
}

int raycast_visibility(const Eigen::Vector3d& point, const Camera& camera,
                       const OccluderSet& occluders, RaycastMode mode, double voxel_size) {
  if (camera.to_camera(point).z() <= 1e-9) {
    fail(ErrorCode::kBehindCamera, "keypoint is behind the camera");
  }
  if (mode == RaycastMode::kAnalytic) {
    return segment_blocked(camera.center(), point, occluders) ? 0 : 1;
  }
  return raycast_visibility(point, camera, VoxelGrid(occluders, voxel_size));
}

int raycast_visibility(const Eigen::Vector3d& point, const Camera& camera,
                       const VoxelGrid& voxels) {
  if (camera.to_camera(point).z() <= 1e-9) {
    fail(ErrorCode::kBehindCamera, "keypoint is behind the camera");
  }
  return voxels.segment_blocked(camera.center(), point) ? 0 : 1;
}

VisibilityMap render_visibility_label(std::span<const Eigen::Vector3d> keypoints,
                                      const Camera& camera, const OccluderSet& occluders) {
  const int channels = static_cast<int>(keypoints.size()) + 1;
  VisibilityMap out(camera.image_width(), camera.image_height(), channels);
  for (int c = 0; c < channels; ++c) {
    double value = kVisibleLabel;
    if (c + 1 < channels) {
      try {
        value = raycast_visibility(keypoints[c], camera, occluders) ? kVisibleLabel
                                                                    : kOccludedLabel;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kBehindCamera) throw;
        value = kOccludedLabel;
      }
    }
    std::fill(out.plane(c).begin(), out.plane(c).end(), value);
  }
  return out;
}

}  // namespace mvkp
