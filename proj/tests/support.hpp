#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "mvkp/geometry.hpp"
#include "mvkp/grid.hpp"

namespace mvkp::test {

inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n,
                                               double floor = 0.05) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> p(n);
  for (double& v : p) v = u(rng);
  normalize_in_place(p);
  return p;
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v(n(rng), n(rng), n(rng));
  return v.normalized();
}

// Camera somewhere on a shell around the origin looking near it.
inline Camera random_camera(std::mt19937_64& rng, int width = 32, int height = 32,
                            double focal = 30.0) {
  std::uniform_real_distribution<double> dist(4.0, 8.0);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  Eigen::Vector3d center = random_unit(rng) * dist(rng);
  if (std::abs(center.normalized().z()) > 0.9) center.z() *= 0.3;
  const Eigen::Vector3d target(jitter(rng), jitter(rng), jitter(rng));
  return Camera::look_at(center, target, Eigen::Vector3d::UnitZ(), focal, width, height);
}

inline Eigen::Vector3d random_point(std::mt19937_64& rng, double radius = 1.0) {
  std::uniform_real_distribution<double> u(-radius, radius);
  return {u(rng), u(rng), u(rng)};
}

// Ring of cameras looking at the origin.
inline std::vector<Camera> ring_rig(int n, double radius, double height, double focal = 30.0,
                                    int size = 32) {
  std::vector<Camera> cams;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * M_PI * k / n;
    cams.push_back(Camera::look_at({radius * std::cos(a), radius * std::sin(a), height},
                                   Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), focal, size,
                                   size));
  }
  return cams;
}

// Central difference of f at x along coordinate k.
inline double central_difference(const std::function<double(std::span<const double>)>& f,
                                 std::vector<double> x, std::size_t k, double h) {
  const double x0 = x[k];
  x[k] = x0 + h;
  const double up = f(x);
  x[k] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Worst relative error between an analytic gradient and central differences
// over every coordinate.
inline double max_gradient_error(const std::function<double(std::span<const double>)>& f,
                                 const std::vector<double>& x, std::span<const double> grad,
                                 double h = 1e-6, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    worst = std::max(worst, relative_error(grad[k], central_difference(f, x, k, h), floor));
  }
  return worst;
}

}  // namespace mvkp::test
