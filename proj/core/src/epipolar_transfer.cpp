#include "mvkp/epipolar_transfer.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "mvkp/error.hpp"
#include "mvkp/heatmap.hpp"

namespace mvkp {
namespace {

// Oriented image line of the plane at (unwrapped) angle theta. Orientation is
// continuous in theta, which is what the band test relies on.
Eigen::Vector3d oriented_line(const EpipolarPencil& pencil, const Camera& camera, double theta) {
  const Eigen::Vector3d normal =
      std::cos(theta) * pencil.reference_normal() + std::sin(theta) * pencil.binormal();
  Eigen::Vector3d line = camera.intrinsics().inverse().transpose() * camera.rotation() * normal;
  return line / line.norm();
}

struct CommonBins {
  std::vector<int> bins;
  double sum_i = 0.0;
  double sum_j = 0.0;
};

CommonBins common_bins(const EpipolarDistribution& q_i, const EpipolarDistribution& q_j) {
  require(q_i.bin_count() == q_j.bin_count(), ErrorCode::kShapeMismatch,
          "epipolar distributions use different bin counts");
  CommonBins common;
  for (int b = 0; b < q_i.bin_count(); ++b) {
    if (q_i.occupied[b] && q_j.occupied[b]) {
      common.bins.push_back(b);
      common.sum_i += q_i.raw_max[b];
      common.sum_j += q_j.raw_max[b];
    }
  }
  return common;
}

void check_plan(ConstPlane p, const TransferPlan& plan) {
  require(p.width == plan.width() && p.height == plan.height() &&
              p.values.size() == static_cast<std::size_t>(p.width) * p.height,
          ErrorCode::kShapeMismatch, "heatmap does not match the transfer plan's view");
}

}  // namespace

TransferPlan::TransferPlan(const EpipolarPencil& pencil, PencilView view)
    : width_(pencil.camera(view).image_width()),
      height_(pencil.camera(view).image_height()),
      bin_count_(pencil.bin_count()),
      view_(view),
      cell_bins_(static_cast<std::size_t>(width_) * height_, -1),
      occupied_(static_cast<std::size_t>(bin_count_), false),
      epipole_inside_(pencil.epipole_inside(view)) {
  const Camera& camera = pencil.camera(view);
  if (epipole_inside_) {
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        try {
          cell_bins_[static_cast<std::size_t>(y) * width_ + x] =
              pencil.bin_of_theta(theta_of_pixel(pencil, view, Eigen::Vector2d(x, y)));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kEpipolePixel) throw;
        }
      }
    }
  } else {
    // Boundary lines of all bins; a cell belongs to bin b when it lies on
    // opposite sides of (or on) lines b and b+1.
    std::vector<Eigen::Vector3d> boundaries(static_cast<std::size_t>(bin_count_) + 1);
    for (int b = 0; b <= bin_count_; ++b) {
      const double theta =
          pencil.theta_low() + pencil.theta_span() * static_cast<double>(b) / bin_count_;
      boundaries[b] = oriented_line(pencil, camera, theta);
    }
    std::vector<double> side(boundaries.size());
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        const Eigen::Vector3d cell(x, y, 1.0);
        for (std::size_t b = 0; b < boundaries.size(); ++b) side[b] = boundaries[b].dot(cell);
        for (int b = 0; b < bin_count_; ++b) {
          if (side[b] * side[b + 1] <= 0.0) {
            cell_bins_[static_cast<std::size_t>(y) * width_ + x] = b;
            break;
          }
        }
      }
    }
  }
  for (int b : cell_bins_) {
    if (b >= 0) occupied_[b] = true;
  }
}

EpipolarDistribution transfer(ConstPlane p, const TransferPlan& plan) {
  check_plan(p, plan);
  const int bins = plan.bin_count();
  EpipolarDistribution q;
  q.bins.assign(bins, 0.0);
  q.raw_max.assign(bins, 0.0);
  q.argmax_cells.assign(bins, -1);
  q.occupied = plan.occupied();
  q.epipole_inside = plan.epipole_inside();
  const std::span<const int> cell_bins = plan.cell_bins();
  for (std::size_t k = 0; k < cell_bins.size(); ++k) {
    const int b = cell_bins[k];
    if (b < 0) continue;
    if (q.argmax_cells[b] < 0 || p.values[k] > q.raw_max[b]) {
      q.raw_max[b] = p.values[k];
      q.argmax_cells[b] = static_cast<int>(k);
    }
  }
  double sum = 0.0;
  for (double v : q.raw_max) sum += v;
  if (sum > 0.0) {
    for (int b = 0; b < bins; ++b) q.bins[b] = q.raw_max[b] / sum;
  }
  return q;
}

EpipolarDistribution transfer(ConstPlane p, const EpipolarPencil& pencil, PencilView view) {
  return transfer(p, TransferPlan(pencil, view));
}

double cross_view_value(ConstPlane p_i, ConstPlane p_j, const TransferPlan& plan_i,
                        const TransferPlan& plan_j) {
  const EpipolarDistribution q_i = transfer(p_i, plan_i);
  const EpipolarDistribution q_j = transfer(p_j, plan_j);
  const CommonBins common = common_bins(q_i, q_j);
  if (common.bins.empty() || common.sum_i <= 0.0 || common.sum_j <= 0.0) return 0.0;
  std::vector<double> a, b;
  for (int bin : common.bins) {
    a.push_back(q_i.raw_max[bin] / common.sum_i);
    b.push_back(q_j.raw_max[bin] / common.sum_j);
  }
  return kl_value(a, b) + kl_value(b, a);
}

CrossViewResult cross_view_loss(ConstPlane p_i, ConstPlane p_j, const TransferPlan& plan_i,
                                const TransferPlan& plan_j) {
  const EpipolarDistribution q_i = transfer(p_i, plan_i);
  const EpipolarDistribution q_j = transfer(p_j, plan_j);
  CrossViewResult result;
  result.grad_i.assign(p_i.values.size(), 0.0);
  result.grad_j.assign(p_j.values.size(), 0.0);
  const CommonBins common = common_bins(q_i, q_j);
  if (common.bins.empty() || common.sum_i <= 0.0 || common.sum_j <= 0.0) return result;

  const std::size_t n = common.bins.size();
  std::vector<double> a(n), b(n);
  for (std::size_t k = 0; k < n; ++k) {
    a[k] = q_i.raw_max[common.bins[k]] / common.sum_i;
    b[k] = q_j.raw_max[common.bins[k]] / common.sum_j;
  }
  const KlResult forward = kl_divergence(a, b);
  const KlResult reverse = kl_divergence(b, a);
  result.value = forward.value + reverse.value;

  // d/da and d/db, then through a = m_i / sum(m_i) and the max-pool.
  std::vector<double> grad_a(n), grad_b(n);
  double dot_a = 0.0, dot_b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    grad_a[k] = forward.grad_p[k] + reverse.grad_q[k];
    grad_b[k] = forward.grad_q[k] + reverse.grad_p[k];
    dot_a += grad_a[k] * a[k];
    dot_b += grad_b[k] * b[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    const int bin = common.bins[k];
    result.grad_i[q_i.argmax_cells[bin]] += (grad_a[k] - dot_a) / common.sum_i;
    result.grad_j[q_j.argmax_cells[bin]] += (grad_b[k] - dot_b) / common.sum_j;
  }
  return result;
}

CrossViewResult cross_view_loss(ConstPlane p_i, ConstPlane p_j, const EpipolarPencil& pencil) {
  return cross_view_loss(p_i, p_j, TransferPlan(pencil, PencilView::kI),
                         TransferPlan(pencil, PencilView::kJ));
}

Heatmap backproject(const EpipolarDistribution& q, const TransferPlan& target) {
  require(q.bin_count() == target.bin_count(), ErrorCode::kShapeMismatch,
          "distribution and plan use different bin counts");
  Heatmap out(target.width(), target.height(), 1);
  std::span<double> values = out.plane(0);
  const std::span<const int> cell_bins = target.cell_bins();
  for (std::size_t k = 0; k < cell_bins.size(); ++k) {
    if (cell_bins[k] >= 0) values[k] = q.bins[cell_bins[k]];
  }
  normalize_in_place(values);
  return out;
}

Heatmap backproject(const EpipolarDistribution& q, const EpipolarPencil& pencil,
                    PencilView target) {
  return backproject(q, TransferPlan(pencil, target));
}

}  // namespace mvkp
