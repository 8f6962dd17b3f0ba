#include "mvkp/temporal.hpp"

#include <cmath>

#include "mvkp/error.hpp"
#include "mvkp/heatmap.hpp"

namespace mvkp {

BilinearWarp::BilinearWarp(const FlowField& flow)
    : width_(flow.width()), height_(flow.height()) {
  require(flow.channels() == 2, ErrorCode::kShapeMismatch, "flow field needs two channels");
  taps_.resize(flow.shape().plane_size());
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const double u = flow.at(x, y, 0);
      const double v = flow.at(x, y, 1);
      require(std::isfinite(u) && std::isfinite(v), ErrorCode::kInvalidArgument,
              "flow field has non-finite entries");
      const double sx = x + u;
      const double sy = y + v;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double ax = sx - fx;
      const double ay = sy - fy;
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      Taps& t = taps_[static_cast<std::size_t>(y) * width_ + x];
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      const double ws[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      for (int k = 0; k < 4; ++k) {
        const bool inside = xs[k] >= 0 && ys[k] >= 0 && xs[k] < width_ && ys[k] < height_;
        t.index[k] = inside ? ys[k] * width_ + xs[k] : 0;
        t.weight[k] = inside ? ws[k] : 0.0;
      }
    }
  }
}

void BilinearWarp::sample(std::span<const double> source, std::span<double> raw) const {
  require(source.size() == taps_.size() && raw.size() == taps_.size(), ErrorCode::kShapeMismatch,
          "warp operand does not match the flow field");
  for (std::size_t k = 0; k < taps_.size(); ++k) {
    const Taps& t = taps_[k];
    double acc = 0.0;
    for (int m = 0; m < 4; ++m) acc += t.weight[m] * source[t.index[m]];
    raw[k] = acc;
  }
}

void BilinearWarp::sample_transpose(std::span<const double> grad_raw,
                                    std::span<double> grad_source) const {
  require(grad_raw.size() == taps_.size() && grad_source.size() == taps_.size(),
          ErrorCode::kShapeMismatch, "warp operand does not match the flow field");
  for (std::size_t k = 0; k < taps_.size(); ++k) {
    const Taps& t = taps_[k];
    for (int m = 0; m < 4; ++m) grad_source[t.index[m]] += t.weight[m] * grad_raw[k];
  }
}

std::vector<double> WarpResult::vjp(std::span<const double> grad_warped) const {
  std::vector<double> grad_source(warped.values.size(), 0.0);
  if (mass <= 0.0) return grad_source;
  double dot = 0.0;
  for (std::size_t k = 0; k < grad_warped.size(); ++k) dot += grad_warped[k] * warped.values[k];
  std::vector<double> grad_raw(grad_warped.size());
  for (std::size_t k = 0; k < grad_warped.size(); ++k) {
    grad_raw[k] = (grad_warped[k] - dot) / mass;
  }
  op->sample_transpose(grad_raw, grad_source);
  return grad_source;
}

WarpResult warp(ConstPlane p_t2, std::shared_ptr<const BilinearWarp> op) {
  require(p_t2.width == op->width() && p_t2.height == op->height(), ErrorCode::kShapeMismatch,
          "heatmap and flow field differ in size");
  WarpResult result;
  result.warped = Plane(p_t2.width, p_t2.height);
  op->sample(p_t2.values, result.warped.values);
  result.mass = normalize_in_place(result.warped.values);
  result.op = std::move(op);
  return result;
}

WarpResult warp(ConstPlane p_t2, const FlowField& flow) {
  require(p_t2.width == flow.width() && p_t2.height == flow.height(), ErrorCode::kShapeMismatch,
          "heatmap and flow field differ in size");
  return warp(p_t2, std::make_shared<const BilinearWarp>(flow));
}

double flow_magnitude_sum(const FlowField& flow) {
  require(flow.channels() == 2, ErrorCode::kShapeMismatch, "flow field needs two channels");
  const std::span<const double> u = flow.plane(0);
  const std::span<const double> v = flow.plane(1);
  double sum = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) sum += std::hypot(u[k], v[k]);
  return sum;
}

bool gate(const FlowField& flow, double eps_m, double eps_M) {
  require(eps_m < eps_M, ErrorCode::kInvalidArgument, "gate needs eps_m < eps_M");
  const double sum = flow_magnitude_sum(flow);
  return eps_m < sum && sum < eps_M;
}

TemporalResult temporal_loss(ConstPlane p_t1, ConstPlane p_t2,
                             const std::shared_ptr<const BilinearWarp>& op,
                             const TemporalOptions& options) {
  require(p_t1.width == p_t2.width && p_t1.height == p_t2.height, ErrorCode::kShapeMismatch,
          "temporal pair differs in size");
  const WarpResult warped = warp(p_t2, op);
  TemporalResult result;
  const KlResult kl = kl_divergence(p_t1.values, warped.warped.values);
  result.value = kl.value;
  result.grad_t1 = kl.grad_p;
  std::vector<double> grad_warped = kl.grad_q;
  if (options.symmetric) {
    const KlResult back = kl_divergence(warped.warped.values, p_t1.values);
    result.value += back.value;
    for (std::size_t k = 0; k < grad_warped.size(); ++k) {
      result.grad_t1[k] += back.grad_q[k];
      grad_warped[k] += back.grad_p[k];
    }
  }
  if (options.freeze_warped) {
    result.grad_t2.assign(p_t2.values.size(), 0.0);
  } else {
    result.grad_t2 = warped.vjp(grad_warped);
  }
  return result;
}

TemporalResult temporal_loss(ConstPlane p_t1, ConstPlane p_t2, const FlowField& flow,
                             const TemporalOptions& options) {
  require(p_t2.width == flow.width() && p_t2.height == flow.height(), ErrorCode::kShapeMismatch,
          "heatmap and flow field differ in size");
  return temporal_loss(p_t1, p_t2, std::make_shared<const BilinearWarp>(flow), options);
}

}  // namespace mvkp
