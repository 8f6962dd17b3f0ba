#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mvkp/grid.hpp"

namespace mvkp {

// Smoothing added inside the logarithms of every KL term.
inline constexpr double kKlEpsilon = 1e-8;

enum class Provenance { kHuman, kAugmented };

struct KeypointLabel {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();  // grid units
  bool visible = true;
  Provenance provenance = Provenance::kHuman;
};

// One optional label per channel; the last channel is the background and is
// never labeled directly.
struct Annotation {
  std::vector<std::optional<KeypointLabel>> channels;

  Annotation() = default;
  explicit Annotation(int channel_count) : channels(static_cast<std::size_t>(channel_count)) {}

  int channel_count() const { return static_cast<int>(channels.size()); }
  bool any_present() const;
};

// Gaussian probability grid centred at `center`, renormalized over the grid.
Heatmap render_gaussian(const Eigen::Vector2d& center, double sigma, int width, int height);

struct KlResult {
  double value = 0.0;
  std::vector<double> grad_p;
  std::vector<double> grad_q;
};

// sum_k P_k ln((P_k + eps) / (Q_k + eps)) and its gradients w.r.t. P and Q.
KlResult kl_divergence(std::span<const double> p, std::span<const double> q,
                       double eps = kKlEpsilon);

// Value only; same formula as kl_divergence.
double kl_value(std::span<const double> p, std::span<const double> q, double eps = kKlEpsilon);

// Grid coordinate of the maximum; ties go to the smallest row-major index.
Eigen::Vector2d argmax_peak(ConstPlane p);
Eigen::Vector2d argmax_peak(const Heatmap& p, int channel);

// Probability-weighted mean coordinate.
Eigen::Vector2d soft_argmax(ConstPlane p);
Eigen::Vector2d soft_argmax(const Heatmap& p, int channel);

double entropy(std::span<const double> p);

}  // namespace mvkp
