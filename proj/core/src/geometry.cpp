#include "mvkp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mvkp/error.hpp"

namespace mvkp {
namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

double wrap_pi(double theta) {
  theta = std::fmod(theta, kPi);
  if (theta < 0.0) theta += kPi;
  if (theta >= kPi) theta -= kPi;
  return theta;
}

// Ray direction through a pixel, not normalized; positive scale along the
// viewing direction.
Eigen::Vector3d ray_direction(const Camera& camera, const Eigen::Vector2d& x) {
  const Eigen::Vector3d xh(x.x(), x.y(), 1.0);
  return camera.rotation().transpose() * camera.intrinsics().inverse() * xh;
}

double theta_of_direction(const EpipolarPencil& pencil, const Eigen::Vector3d& direction) {
  Eigen::Vector3d m = pencil.baseline().cross(direction);
  const double norm = m.norm();
  if (norm <= 1e-12 * direction.norm()) {
    fail(ErrorCode::kEpipolePixel, "pixel ray is parallel to the baseline");
  }
  m /= norm;
  return wrap_pi(std::atan2(m.dot(pencil.binormal()), m.dot(pencil.reference_normal())));
}

bool epipole_in_image(const Camera& camera, const Eigen::Vector3d& other_center) {
  const Eigen::Vector3d e = camera.intrinsics() * camera.to_camera(other_center);
  if (std::abs(e.z()) < 1e-12 * e.norm()) return false;
  const double u = e.x() / e.z();
  const double v = e.y() / e.z();
  return u >= -0.5 && v >= -0.5 && u <= camera.image_width() - 0.5 &&
         v <= camera.image_height() - 0.5;
}

}  // namespace

Camera::Camera(const Eigen::Matrix3d& intrinsics, const Eigen::Matrix3d& rotation,
               const Eigen::Vector3d& center, int image_width, int image_height)
    : intrinsics_(intrinsics),
      rotation_(rotation),
      center_(center),
      image_width_(image_width),
      image_height_(image_height) {
  require(image_width > 0 && image_height > 0, ErrorCode::kInvalidArgument,
          "camera image size must be positive");
  require((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
              1e-9,
          ErrorCode::kInvalidArgument, "camera rotation is not orthonormal");
  require(rotation.determinant() > 0.0, ErrorCode::kInvalidArgument,
          "camera rotation must have determinant +1");
  require(intrinsics(1, 0) == 0.0 && intrinsics(2, 0) == 0.0 && intrinsics(2, 1) == 0.0,
          ErrorCode::kInvalidArgument, "intrinsics must be upper triangular");
  require(intrinsics(2, 2) == 1.0, ErrorCode::kInvalidArgument, "intrinsics[2][2] must be 1");
  require(intrinsics(0, 0) > 0.0 && intrinsics(1, 1) > 0.0, ErrorCode::kInvalidArgument,
          "focal lengths must be positive");
}

Camera Camera::look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double focal, int image_width,
                       int image_height) {
  const Eigen::Vector3d forward = (target - center).normalized();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d rotation;
  rotation.row(0) = right.transpose();
  rotation.row(1) = down.transpose();
  rotation.row(2) = forward.transpose();
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = focal;
  k(1, 1) = focal;
  k(0, 2) = 0.5 * (image_width - 1);
  k(1, 2) = 0.5 * (image_height - 1);
  return Camera(k, rotation, center, image_width, image_height);
}

Eigen::Matrix<double, 3, 4> Camera::projection_matrix() const {
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = rotation_;
  rt.col(3) = -rotation_ * center_;
  return intrinsics_ * rt;
}

Camera Camera::scaled(int factor) const {
  require(factor > 0, ErrorCode::kInvalidArgument, "scale factor must be positive");
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  s(0, 0) = factor;
  s(1, 1) = factor;
  s(0, 2) = 0.5 * (factor - 1);
  s(1, 2) = 0.5 * (factor - 1);
  return Camera(s * intrinsics_, rotation_, center_, image_width_ * factor,
                image_height_ * factor);
}

Eigen::Vector2d project(const Camera& camera, const Eigen::Vector3d& point) {
  const Eigen::Vector3d xc = camera.to_camera(point);
  if (xc.z() <= 1e-9) fail(ErrorCode::kDegenerateDepth, "point is at or behind the camera");
  const Eigen::Vector3d x = camera.intrinsics() * xc;
  return {x.x() / x.z(), x.y() / x.z()};
}

FundamentalMatrix fundamental_from_cameras(const Camera& cam_i, const Camera& cam_j,
                                           ViewPair view_pair) {
  if ((cam_i.center() - cam_j.center()).norm() <= 1e-9) {
    fail(ErrorCode::kCoincidentCenters, "fundamental matrix needs distinct camera centers");
  }
  // X_j = R_rel X_i + t with R_rel = R_j R_i^T and t = R_j (C_i - C_j).
  const Eigen::Matrix3d r_rel = cam_j.rotation() * cam_i.rotation().transpose();
  const Eigen::Vector3d t = cam_j.rotation() * (cam_i.center() - cam_j.center());
  const Eigen::Matrix3d essential = skew(t) * r_rel;
  Eigen::Matrix3d f =
      cam_j.intrinsics().inverse().transpose() * essential * cam_i.intrinsics().inverse();
  f /= f.cwiseAbs().maxCoeff();
  return {f, view_pair};
}

Eigen::Vector3d epipolar_line(const FundamentalMatrix& f, const Eigen::Vector2d& x) {
  const Eigen::Vector3d xh(x.x(), x.y(), 1.0);
  Eigen::Vector3d line = f.matrix * xh;
  const double norm = line.head<2>().norm();
  if (norm <= 1e-10 * f.matrix.norm() * xh.norm()) {
    fail(ErrorCode::kDegenerateLine, "point is the epipole; epipolar line undefined");
  }
  return line / norm;
}

Ray inverse_ray(const Camera& camera, const Eigen::Vector2d& x) {
  return {camera.center(), ray_direction(camera, x).normalized()};
}

EpipolarPencil::EpipolarPencil(const Camera& cam_i, const Camera& cam_j, int bin_count)
    : cam_i_(cam_i), cam_j_(cam_j) {
  const Eigen::Vector3d delta = cam_j.center() - cam_i.center();
  if (delta.norm() <= 1e-9) {
    fail(ErrorCode::kCoincidentCenters, "epipolar pencil needs distinct camera centers");
  }
  baseline_ = delta.normalized();
  if (std::abs(baseline_.z()) > 1.0 - 1e-6) {
    reference_normal_ = baseline_.cross(Eigen::Vector3d::UnitX()).normalized();
  } else {
    reference_normal_ = baseline_.cross(Eigen::Vector3d::UnitZ()).normalized();
  }
  binormal_ = baseline_.cross(reference_normal_);
  bin_count_ = bin_count > 0 ? bin_count : std::max(cam_i.image_width(), cam_i.image_height());

  epipole_inside_i_ = epipole_in_image(cam_i, cam_j.center());
  epipole_inside_j_ = epipole_in_image(cam_j, cam_i.center());

  // Smallest arc of the theta circle (period pi) covering every cell center
  // of both images: the complement of the widest gap between sorted angles.
  std::vector<double> thetas;
  for (const Camera* cam : {&cam_i_, &cam_j_}) {
    for (int y = 0; y < cam->image_height(); ++y) {
      for (int x = 0; x < cam->image_width(); ++x) {
        const Eigen::Vector3d d = ray_direction(*cam, Eigen::Vector2d(x, y));
        if (baseline_.cross(d).norm() <= 1e-12 * d.norm()) continue;
        thetas.push_back(theta_of_direction(*this, d));
      }
    }
  }
  std::sort(thetas.begin(), thetas.end());
  double widest_gap = thetas.front() + kPi - thetas.back();
  double low = thetas.front();
  for (std::size_t k = 1; k < thetas.size(); ++k) {
    const double gap = thetas[k] - thetas[k - 1];
    if (gap > widest_gap) {
      widest_gap = gap;
      low = thetas[k];
    }
  }
  const double span = kPi - widest_gap;
  const double margin = 1e-7 * std::max(span, 1e-3);
  if (epipole_inside_i_ || epipole_inside_j_ || span + 2.0 * margin >= kPi * (1.0 - 1e-9)) {
    full_circle_ = true;
    theta_low_ = 0.0;
    theta_span_ = kPi;
  } else {
    theta_low_ = wrap_pi(low - margin);
    theta_span_ = span + 2.0 * margin;
  }
}

double EpipolarPencil::bin_edge(int b) const {
  return wrap_pi(theta_low_ + theta_span_ * static_cast<double>(b) / bin_count_);
}

int EpipolarPencil::bin_of_theta(double theta) const {
  const double rel = wrap_pi(theta - theta_low_);
  if (rel >= theta_span_) return -1;
  const int b = static_cast<int>(std::floor(rel / theta_span_ * bin_count_));
  return std::clamp(b, 0, bin_count_ - 1);
}

Eigen::Vector4d plane_of_theta(const EpipolarPencil& pencil, double theta) {
  const Eigen::Vector3d normal =
      std::cos(theta) * pencil.reference_normal() + std::sin(theta) * pencil.binormal();
  Eigen::Vector4d plane;
  plane.head<3>() = normal;
  plane(3) = -normal.dot(pencil.cam_i().center());
  return plane;
}

Eigen::Vector3d line_of_plane(const Camera& camera, const Eigen::Vector4d& plane) {
  // A pixel's ray lies in the plane iff n . (R^T K^-1 x) = 0.
  const Eigen::Vector3d line =
      camera.intrinsics().inverse().transpose() * camera.rotation() * plane.head<3>();
  const double norm = line.head<2>().norm();
  if (norm <= 1e-12 * line.norm()) {
    fail(ErrorCode::kPlaneThroughPrincipalAxis,
         "plane is parallel to the image plane; its image line is at infinity");
  }
  return line / norm;
}

double theta_of_pixel(const EpipolarPencil& pencil, PencilView view, const Eigen::Vector2d& x) {
  return theta_of_direction(pencil, ray_direction(pencil.camera(view), x));
}

Eigen::Vector3d triangulate_dlt(std::span<const Observation> observations) {
  if (observations.size() < 2) {
    fail(ErrorCode::kInsufficientViews, "triangulation needs at least two observations");
  }
  // Shared similarity transform on the pixels: centroid to the origin, mean
  // distance sqrt(2).
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const Observation& obs : observations) centroid += obs.pixel;
  centroid /= static_cast<double>(observations.size());
  double mean_distance = 0.0;
  for (const Observation& obs : observations) mean_distance += (obs.pixel - centroid).norm();
  mean_distance /= static_cast<double>(observations.size());
  const double scale = mean_distance > 1e-12 ? std::sqrt(2.0) / mean_distance : 1.0;
  Eigen::Matrix3d normalizer = Eigen::Matrix3d::Identity();
  normalizer(0, 0) = scale;
  normalizer(1, 1) = scale;
  normalizer(0, 2) = -scale * centroid.x();
  normalizer(1, 2) = -scale * centroid.y();

  Eigen::MatrixXd design(2 * observations.size(), 4);
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const Observation& obs = observations[k];
    Eigen::Matrix<double, 3, 4> p = normalizer * obs.camera.projection_matrix();
    p /= p.norm();
    const Eigen::Vector3d x = normalizer * Eigen::Vector3d(obs.pixel.x(), obs.pixel.y(), 1.0);
    design.row(2 * k) = x.x() * p.row(2) - p.row(0);
    design.row(2 * k + 1) = x.y() * p.row(2) - p.row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const Eigen::Vector4d singular = svd.singularValues().head<4>();
  if (design.rows() < 4 || singular(2) <= 1e-12 * singular(0)) {
    fail(ErrorCode::kDegenerateConfiguration, "triangulation design matrix has rank < 3");
  }
  const Eigen::Vector4d homogeneous = svd.matrixV().col(3);
  if (std::abs(homogeneous(3)) <= 1e-14 * homogeneous.head<3>().norm()) {
    fail(ErrorCode::kDegenerateConfiguration, "triangulated point is at infinity");
  }
  return homogeneous.head<3>() / homogeneous(3);
}

double reprojection_error(const Observation& observation, const Eigen::Vector3d& point) {
  return (project(observation.camera, point) - observation.pixel).norm();
}

RansacResult triangulate_ransac(std::span<const Observation> observations,
                                double inlier_threshold_px, int iterations,
                                std::uint64_t rng_seed) {
  if (observations.size() < 2) {
    fail(ErrorCode::kInsufficientViews, "RANSAC triangulation needs at least two observations");
  }
  require(inlier_threshold_px > 0.0, ErrorCode::kInvalidArgument,
          "inlier threshold must be positive");

  const auto consensus = [&](const Eigen::Vector3d& point, std::vector<bool>& mask,
                             double& total_error) {
    int count = 0;
    total_error = 0.0;
    for (std::size_t k = 0; k < observations.size(); ++k) {
      mask[k] = false;
      if (observations[k].camera.to_camera(point).z() <= 1e-9) continue;
      const double error = reprojection_error(observations[k], point);
      if (error <= inlier_threshold_px) {
        mask[k] = true;
        total_error += error;
        ++count;
      }
    }
    return count;
  };

  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, observations.size() - 1);
  std::vector<bool> mask(observations.size());
  std::vector<bool> best_mask(observations.size(), false);
  int best_count = 0;
  double best_error = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    const Observation sample[2] = {observations[a], observations[b]};
    Eigen::Vector3d candidate;
    try {
      candidate = triangulate_dlt(sample);
    } catch (const Error&) {
      continue;
    }
    double error = 0.0;
    const int count = consensus(candidate, mask, error);
    if (count > best_count || (count == best_count && count > 0 && error < best_error)) {
      best_count = count;
      best_error = error;
      best_mask = mask;
    }
    if (best_count == static_cast<int>(observations.size())) break;
  }
  if (best_count < 2) fail(ErrorCode::kNoConsensus, "no pair of views reached consensus");

  std::vector<Observation> inliers;
  for (std::size_t k = 0; k < observations.size(); ++k) {
    if (best_mask[k]) inliers.push_back(observations[k]);
  }
  RansacResult result;
  result.point = triangulate_dlt(inliers);
  result.inliers.resize(observations.size());
  double error = 0.0;
  result.inlier_count = consensus(result.point, result.inliers, error);
  if (result.inlier_count < 2) fail(ErrorCode::kNoConsensus, "refit lost consensus");
  return result;
}

}  // namespace mvkp
