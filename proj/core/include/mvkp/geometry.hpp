#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mvkp {

// Pinhole camera. Projection is K [R | -R C]; pixel units are whatever K was
// built for (the synthetic rigs use heatmap-grid cells).
class Camera {
 public:
  Camera(const Eigen::Matrix3d& intrinsics, const Eigen::Matrix3d& rotation,
         const Eigen::Vector3d& center, int image_width, int image_height);

  // Camera at `center` looking at `target`, with image rows pointing along -up.
  static Camera look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double focal, int image_width,
                        int image_height);

  const Eigen::Matrix3d& intrinsics() const { return intrinsics_; }
  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& center() const { return center_; }
  int image_width() const { return image_width_; }
  int image_height() const { return image_height_; }

  Eigen::Matrix<double, 3, 4> projection_matrix() const;

  // Point expressed in the camera frame.
  Eigen::Vector3d to_camera(const Eigen::Vector3d& point) const {
    return rotation_ * (point - center_);
  }

  // Same camera resampled to an image `factor` times larger, keeping the
  // cell-center convention (cell g maps to factor*g + (factor-1)/2).
  Camera scaled(int factor) const;

  friend bool operator==(const Camera&, const Camera&) = default;

 private:
  Eigen::Matrix3d intrinsics_;
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d center_;
  int image_width_;
  int image_height_;
};

struct ViewPair {
  int i = 0;
  int j = 1;
};

struct FundamentalMatrix {
  Eigen::Matrix3d matrix;
  ViewPair view_pair;
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;

  Eigen::Vector3d point_at(double lambda) const { return origin + lambda * direction; }
};

enum class PencilView { kI, kJ };

// One-parameter family of planes through both camera centers, parametrized by
// the rotation angle theta in [0, pi) about the baseline. Only the arc of
// theta values actually seen by the two images is divided into bins.
class EpipolarPencil {
 public:
  // bin_count <= 0 selects max(width, height) of the first camera.
  EpipolarPencil(const Camera& cam_i, const Camera& cam_j, int bin_count = 0);

  const Camera& cam_i() const { return cam_i_; }
  const Camera& cam_j() const { return cam_j_; }
  const Camera& camera(PencilView view) const { return view == PencilView::kI ? cam_i_ : cam_j_; }
  const Eigen::Vector3d& baseline() const { return baseline_; }
  const Eigen::Vector3d& reference_normal() const { return reference_normal_; }
  // baseline x reference_normal; the plane normal at theta = pi/2.
  const Eigen::Vector3d& binormal() const { return binormal_; }
  int bin_count() const { return bin_count_; }
  double theta_low() const { return theta_low_; }
  double theta_span() const { return theta_span_; }
  bool covers_full_circle() const { return full_circle_; }

  // Lower edge of bin b (b == bin_count gives the upper edge of the last bin),
  // reduced to [0, pi).
  double bin_edge(int b) const;
  // Bin containing theta, or -1 when theta falls outside the binned arc.
  int bin_of_theta(double theta) const;

  bool epipole_inside(PencilView view) const {
    return view == PencilView::kI ? epipole_inside_i_ : epipole_inside_j_;
  }

 private:
  Camera cam_i_;
  Camera cam_j_;
  Eigen::Vector3d baseline_;
  Eigen::Vector3d reference_normal_;
  Eigen::Vector3d binormal_;
  int bin_count_;
  double theta_low_ = 0.0;
  double theta_span_ = 0.0;
  bool full_circle_ = false;
  bool epipole_inside_i_ = false;
  bool epipole_inside_j_ = false;
};

Eigen::Vector2d project(const Camera& camera, const Eigen::Vector3d& point);

FundamentalMatrix fundamental_from_cameras(const Camera& cam_i, const Camera& cam_j,
                                           ViewPair view_pair = {});

// Line in view j; normalized so that (l0, l1) has unit length.
Eigen::Vector3d epipolar_line(const FundamentalMatrix& f, const Eigen::Vector2d& x);

Ray inverse_ray(const Camera& camera, const Eigen::Vector2d& x);

// Homogeneous plane (n, d) with unit normal n and n.X + d = 0.
Eigen::Vector4d plane_of_theta(const EpipolarPencil& pencil, double theta);

// Image line of a plane through the camera center; (l0, l1) has unit length
// and the orientation follows the plane normal.
Eigen::Vector3d line_of_plane(const Camera& camera, const Eigen::Vector4d& plane);

double theta_of_pixel(const EpipolarPencil& pencil, PencilView view, const Eigen::Vector2d& x);

struct Observation {
  Camera camera;
  Eigen::Vector2d pixel;
};

Eigen::Vector3d triangulate_dlt(std::span<const Observation> observations);

struct RansacResult {
  Eigen::Vector3d point;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

RansacResult triangulate_ransac(std::span<const Observation> observations,
                                double inlier_threshold_px, int iterations,
                                std::uint64_t rng_seed);

double reprojection_error(const Observation& observation, const Eigen::Vector3d& point);

}  // namespace mvkp
