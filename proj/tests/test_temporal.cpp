#include <gtest/gtest.h>

#include <random>

#include "mvkp/error.hpp"
#include "mvkp/heatmap.hpp"
#include "mvkp/temporal.hpp"
#include "support.hpp"

using namespace mvkp;

namespace {

FlowField constant_flow(int w, int h, double u, double v) {
  FlowField f(w, h, 2);
  for (double& x : f.plane(0)) x = u;
  for (double& x : f.plane(1)) x = v;
  return f;
}

FlowField random_flow(std::mt19937_64& rng, int w, int h, double scale) {
  std::uniform_real_distribution<double> d(-scale, scale);
  FlowField f(w, h, 2);
  for (double& x : f.values()) x = d(rng);
  return f;
}

Plane random_plane(std::mt19937_64& rng, int w, int h) {
  Plane p(w, h);
  p.values = test::random_distribution(rng, static_cast<std::size_t>(w) * h, 0.01);
  return p;
}

}  // namespace

TEST(Warp, ZeroFlowIsIdentity) {
  std::mt19937_64 rng(1);
  const Plane p = random_plane(rng, 12, 12);
  const WarpResult w = warp(p.view(), FlowField(12, 12, 2));
  for (std::size_t k = 0; k < p.values.size(); ++k) EXPECT_NEAR(w.warped.values[k], p.values[k], 1e-15);
}

TEST(Warp, IntegerShiftMovesGaussian) {
  // Output cell x samples the source at x + flow(x): a flow of -3 in x moves
  // the mode three cells to the right.
  const Heatmap g = render_gaussian({10, 7}, 1.0, 32, 32);
  const WarpResult w = warp(g.plane_view(0), constant_flow(32, 32, -3.0, 0.0));
  EXPECT_EQ(argmax_peak(w.warped.view()), Eigen::Vector2d(13, 7));
  for (int y = 0; y < 32; ++y) {
    for (int x = 3; x < 32; ++x) EXPECT_NEAR(w.warped.at(x, y), g.at(x - 3, y, 0), 1e-9);
  }
}

TEST(Warp, ShiftThenInverseRecoversArgmax) {
  const Heatmap g = render_gaussian({14, 11}, 1.0, 32, 32);
  const WarpResult a = warp(g.plane_view(0), constant_flow(32, 32, 2.0, -3.0));
  const WarpResult b = warp(a.warped.view(), constant_flow(32, 32, -2.0, 3.0));
  EXPECT_EQ(argmax_peak(b.warped.view()), Eigen::Vector2d(14, 11));
}

TEST(Warp, PreservesNormalizationInBounds) {
  std::mt19937_64 rng(2);
  const Plane p = random_plane(rng, 16, 16);
  FlowField flow(16, 16, 2);
  // Fractional flow that keeps every tap inside the interior.
  for (int y = 1; y < 15; ++y) {
    for (int x = 1; x < 15; ++x) {
      flow.at(x, y, 0) = 0.4;
      flow.at(x, y, 1) = -0.3;
    }
  }
  const WarpResult w = warp(p.view(), flow);
  EXPECT_NEAR(plane_sum(w.warped.values), 1.0, 1e-9);
}

TEST(Warp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const Plane p = random_plane(rng, 12, 12);
  const FlowField flow = random_flow(rng, 12, 12, 2.5);
  std::vector<double> weights(144);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : weights) v = u(rng);
  // Scalar probe: <weights, warp(p)>.
  const auto f = [&](std::span<const double> x) {
    const WarpResult w = warp(ConstPlane{12, 12, x}, flow);
    double s = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) s += weights[k] * w.warped.values[k];
    return s;
  };
  const WarpResult w = warp(p.view(), flow);
  const std::vector<double> grad = w.vjp(weights);
  EXPECT_LT(test::max_gradient_error(f, p.values, grad, 1e-6), 1e-4);
}

TEST(Warp, ShapeMismatch) {
  const Plane p(8, 8, 1.0 / 64);
  try {
    warp(p.view(), FlowField(9, 8, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Gate, Bounds) {
  EXPECT_FALSE(gate(FlowField(10, 10, 2), 1.0, 100.0));
  // |(1.2, 1.6)| = 2 on 100 cells.
  const FlowField f = constant_flow(10, 10, 1.2, 1.6);
  EXPECT_NEAR(flow_magnitude_sum(f), 200.0, 1e-9);
  EXPECT_TRUE(gate(f, 100.0, 300.0));
  const FlowField g = constant_flow(10, 10, 3.0, 0.0);
  EXPECT_FALSE(gate(g, 100.0, 300.0));
  EXPECT_FALSE(gate(constant_flow(10, 10, 1.0, 0.0), 100.0, 300.0));
}

TEST(TemporalLoss, ZeroWhenTargetIsTheWarp) {
  std::mt19937_64 rng(4);
  const Plane p2 = random_plane(rng, 12, 12);
  const FlowField flow = random_flow(rng, 12, 12, 1.5);
  const WarpResult w = warp(p2.view(), flow);
  EXPECT_NEAR(temporal_loss(w.warped.view(), p2.view(), flow).value, 0.0, 1e-9);
}

TEST(TemporalLoss, DecreasesAsSpuriousModeFades) {
  const Heatmap target = render_gaussian({10, 10}, 1.0, 24, 24);
  const Heatmap spurious = render_gaussian({18, 5}, 1.0, 24, 24);
  const FlowField flow = constant_flow(24, 24, 1.0, 0.0);
  // P_t2 holds the true mode one cell to the right plus a fading second mode.
  const Heatmap true_t2 = render_gaussian({11, 10}, 1.0, 24, 24);
  double previous = 1e300;
  for (double mass : {0.5, 0.3, 0.1, 0.0}) {
    Plane p2(24, 24);
    for (std::size_t k = 0; k < p2.values.size(); ++k) {
      p2.values[k] = (1 - mass) * true_t2.values()[k] + mass * spurious.values()[k];
    }
    const double loss = temporal_loss(target.plane_view(0), p2.view(), flow).value;
    EXPECT_LT(loss, previous);
    previous = loss;
  }
}

TEST(TemporalLoss, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (bool symmetric : {false, true}) {
    const Plane p1 = random_plane(rng, 12, 12);
    const Plane p2 = random_plane(rng, 12, 12);
    const FlowField flow = random_flow(rng, 12, 12, 2.0);
    TemporalOptions options;
    options.symmetric = symmetric;
    const TemporalResult r = temporal_loss(p1.view(), p2.view(), flow, options);
    const double e1 = test::max_gradient_error(
        [&](std::span<const double> x) {
          return temporal_loss({12, 12, x}, p2.view(), flow, options).value;
        },
        p1.values, r.grad_t1, 1e-6);
    const double e2 = test::max_gradient_error(
        [&](std::span<const double> x) {
          return temporal_loss(p1.view(), {12, 12, x}, flow, options).value;
        },
        p2.values, r.grad_t2, 1e-6);
    EXPECT_LT(e1, 1e-4);
    EXPECT_LT(e2, 1e-4);
  }
}

TEST(TemporalLoss, FrozenWarpedBranchCarriesNoGradient) {
  std::mt19937_64 rng(6);
  const Plane p1 = random_plane(rng, 8, 8);
  const Plane p2 = random_plane(rng, 8, 8);
  TemporalOptions options;
  options.freeze_warped = true;
  const TemporalResult frozen = temporal_loss(p1.view(), p2.view(), FlowField(8, 8, 2), options);
  const TemporalResult full = temporal_loss(p1.view(), p2.view(), FlowField(8, 8, 2));
  EXPECT_EQ(frozen.value, full.value);
  EXPECT_EQ(frozen.grad_t1, full.grad_t1);
  for (double g : frozen.grad_t2) EXPECT_EQ(g, 0.0);
}

TEST(TemporalLoss, InvariantUnderInteriorShift) {
  const Heatmap a1 = render_gaussian({10, 10}, 1.0, 32, 32);
  const Heatmap a2 = render_gaussian({12, 11}, 1.2, 32, 32);
  const Heatmap b1 = render_gaussian({14, 13}, 1.0, 32, 32);
  const Heatmap b2 = render_gaussian({16, 14}, 1.2, 32, 32);
  const FlowField flow = constant_flow(32, 32, 2.0, 1.0);
  const double la = temporal_loss(a1.plane_view(0), a2.plane_view(0), flow).value;
  const double lb = temporal_loss(b1.plane_view(0), b2.plane_view(0), flow).value;
  EXPECT_NEAR(la, lb, 1e-9);
}
