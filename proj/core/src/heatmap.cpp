#include "mvkp/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "mvkp/error.hpp"

namespace mvkp {

bool Annotation::any_present() const {
  for (const auto& label : channels) {
    if (label) return true;
  }
  return false;
}

Heatmap render_gaussian(const Eigen::Vector2d& center, double sigma, int width, int height) {
  require(sigma > 0.0, ErrorCode::kInvalidArgument, "gaussian sigma must be positive");
  Heatmap out(width, height, 1);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < height; ++y) {
    const double dy = y - center.y();
    for (int x = 0; x < width; ++x) {
      const double dx = x - center.x();
      out.at(x, y, 0) = std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  if (normalize_in_place(out.plane(0)) <= 0.0) {
    // Center so far outside the grid that every cell underflowed: fall back
    // to the nearest border cell.
    const int cx = std::clamp(static_cast<int>(std::lround(center.x())), 0, width - 1);
    const int cy = std::clamp(static_cast<int>(std::lround(center.y())), 0, height - 1);
    out.at(cx, cy, 0) = 1.0;
  }
  return out;
}

KlResult kl_divergence(std::span<const double> p, std::span<const double> q, double eps) {
  require(p.size() == q.size(), ErrorCode::kShapeMismatch, "KL arguments differ in size");
  KlResult result;
  result.grad_p.resize(p.size());
  result.grad_q.resize(q.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pe = p[k] + eps;
    const double qe = q[k] + eps;
    const double log_ratio = std::log(pe / qe);
    if (p[k] != 0.0) result.value += p[k] * log_ratio;
    result.grad_p[k] = log_ratio + p[k] / pe;
    result.grad_q[k] = -p[k] / qe;
  }
  return result;
}

double kl_value(std::span<const double> p, std::span<const double> q, double eps) {
  require(p.size() == q.size(), ErrorCode::kShapeMismatch, "KL arguments differ in size");
  double value = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] != 0.0) value += p[k] * std::log((p[k] + eps) / (q[k] + eps));
  }
  return value;
}

Eigen::Vector2d argmax_peak(ConstPlane p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.values.size(); ++k) {
    if (p.values[k] > p.values[best]) best = k;
  }
  return {static_cast<double>(best % p.width), static_cast<double>(best / p.width)};
}

Eigen::Vector2d argmax_peak(const Heatmap& p, int channel) {
  return argmax_peak(p.plane_view(channel));
}

Eigen::Vector2d soft_argmax(ConstPlane p) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  double total = 0.0;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double w = p.at(x, y);
      mean += w * Eigen::Vector2d(x, y);
      total += w;
    }
  }
  return total > 0.0 ? Eigen::Vector2d(mean / total) : Eigen::Vector2d::Zero();
}

Eigen::Vector2d soft_argmax(const Heatmap& p, int channel) {
  return soft_argmax(p.plane_view(channel));
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace mvkp
