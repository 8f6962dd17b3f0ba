#pragma once

#include <span>
#include <vector>

#include "mvkp/geometry.hpp"
#include "mvkp/grid.hpp"

namespace mvkp {

// Precomputed theta-bin of every cell of one view of a pencil. Cells are
// assigned by testing which side of each bin-boundary line they fall on; when
// an epipole lies inside the image the plan falls back to per-cell theta.
class TransferPlan {
 public:
  TransferPlan(const EpipolarPencil& pencil, PencilView view);

  int width() const { return width_; }
  int height() const { return height_; }
  int bin_count() const { return bin_count_; }
  PencilView view() const { return view_; }
  // -1 marks cells that belong to no bin (the epipole cell).
  std::span<const int> cell_bins() const { return cell_bins_; }
  // Bin has at least one cell of this view.
  const std::vector<bool>& occupied() const { return occupied_; }
  bool epipole_inside() const { return epipole_inside_; }

 private:
  int width_;
  int height_;
  int bin_count_;
  PencilView view_;
  std::vector<int> cell_bins_;
  std::vector<bool> occupied_;
  bool epipole_inside_;
};

struct EpipolarDistribution {
  std::vector<double> bins;          // normalized over bins
  std::vector<double> raw_max;       // per-bin maximum before normalization
  std::vector<int> argmax_cells;     // row-major source cell, -1 for empty bins
  std::vector<bool> occupied;
  bool epipole_inside = false;

  int bin_count() const { return static_cast<int>(bins.size()); }
};

EpipolarDistribution transfer(ConstPlane p, const TransferPlan& plan);
EpipolarDistribution transfer(ConstPlane p, const EpipolarPencil& pencil, PencilView view);

struct CrossViewResult {
  double value = 0.0;
  std::vector<double> grad_i;
  std::vector<double> grad_j;
};

// D_KL(Q_i || Q_j) + D_KL(Q_j || Q_i) over the bins occupied in both views.
CrossViewResult cross_view_loss(ConstPlane p_i, ConstPlane p_j, const TransferPlan& plan_i,
                                const TransferPlan& plan_j);
CrossViewResult cross_view_loss(ConstPlane p_i, ConstPlane p_j, const EpipolarPencil& pencil);

double cross_view_value(ConstPlane p_i, ConstPlane p_j, const TransferPlan& plan_i,
                        const TransferPlan& plan_j);

// Paints every cell of the target view with the value of its bin and
// renormalizes. Visualization only.
Heatmap backproject(const EpipolarDistribution& q, const TransferPlan& target);
Heatmap backproject(const EpipolarDistribution& q, const EpipolarPencil& pencil,
                    PencilView target);

}  // namespace mvkp
