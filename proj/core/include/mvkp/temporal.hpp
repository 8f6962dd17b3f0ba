#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "mvkp/grid.hpp"

namespace mvkp {

// Sparse bilinear gather operator built from a flow field: output cell x
// samples the source at x + flow(x). Taps that land outside the grid carry
// zero weight.
class BilinearWarp {
 public:
  explicit BilinearWarp(const FlowField& flow);

  int width() const { return width_; }
  int height() const { return height_; }

  // raw = S * source
  void sample(std::span<const double> source, std::span<double> raw) const;
  // grad_source += S^T * grad_raw
  void sample_transpose(std::span<const double> grad_raw, std::span<double> grad_source) const;

 private:
  struct Taps {
    std::array<int, 4> index;
    std::array<double, 4> weight;
  };

  int width_;
  int height_;
  std::vector<Taps> taps_;
};

// Warped plane plus what is needed to pull gradients back through it.
struct WarpResult {
  Plane warped;
  double mass = 0.0;  // sum before renormalization
  std::shared_ptr<const BilinearWarp> op;

  // d(loss)/d(source) given d(loss)/d(warped).
  std::vector<double> vjp(std::span<const double> grad_warped) const;
};

WarpResult warp(ConstPlane p_t2, const FlowField& flow);
WarpResult warp(ConstPlane p_t2, std::shared_ptr<const BilinearWarp> op);

double flow_magnitude_sum(const FlowField& flow);

// True iff eps_m < sum_x |flow(x)| < eps_M.
bool gate(const FlowField& flow, double eps_m, double eps_M);

struct TemporalOptions {
  // Adds D_KL(warped || P_t1) to the printed direction.
  bool symmetric = false;
  // Treats the warped distribution as a constant target.
  bool freeze_warped = false;
};

struct TemporalResult {
  double value = 0.0;
  std::vector<double> grad_t1;
  std::vector<double> grad_t2;
};

// D_KL(P_t1 || warp(P_t2)).
TemporalResult temporal_loss(ConstPlane p_t1, ConstPlane p_t2, const FlowField& flow,
                             const TemporalOptions& options = {});
TemporalResult temporal_loss(ConstPlane p_t1, ConstPlane p_t2,
                             const std::shared_ptr<const BilinearWarp>& op,
                             const TemporalOptions& options = {});

}  // namespace mvkp
