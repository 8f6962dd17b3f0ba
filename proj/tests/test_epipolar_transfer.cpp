#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mvkp/epipolar_transfer.hpp"
#include "mvkp/error.hpp"
#include "mvkp/heatmap.hpp"
#include "support.hpp"

using namespace mvkp;

namespace {

// Classify every cell by its own theta, max per bin, renormalize.
std::vector<double> oracle_transfer(ConstPlane p, const EpipolarPencil& pencil, PencilView view) {
  std::vector<double> bins(pencil.bin_count(), 0.0);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      double theta = 0.0;
      try {
        theta = theta_of_pixel(pencil, view, Eigen::Vector2d(x, y));
      } catch (const Error&) {
        continue;
      }
      const int b = pencil.bin_of_theta(theta);
      if (b >= 0) bins[b] = std::max(bins[b], p.at(x, y));
    }
  }
  normalize_in_place(bins);
  return bins;
}

Heatmap random_heatmap(std::mt19937_64& rng, int w, int h) {
  Heatmap out(w, h, 1);
  const auto values = test::random_distribution(rng, static_cast<std::size_t>(w) * h, 0.01);
  out.set_plane(0, values);
  return out;
}

struct Pair {
  Camera a;
  Camera b;
};

Pair random_pair(std::mt19937_64& rng, int size = 32) {
  return {test::random_camera(rng, size, size, size * 0.9),
          test::random_camera(rng, size, size, size * 0.9)};
}

}  // namespace

TEST(Transfer, MatchesBruteForceOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Pair pair = random_pair(rng);
    const EpipolarPencil pencil(pair.a, pair.b);
    const Heatmap p = random_heatmap(rng, 32, 32);
    for (PencilView view : {PencilView::kI, PencilView::kJ}) {
      const EpipolarDistribution q = transfer(p.plane_view(0), pencil, view);
      const std::vector<double> oracle = oracle_transfer(p.plane_view(0), pencil, view);
      ASSERT_EQ(q.bin_count(), static_cast<int>(oracle.size()));
      for (int b = 0; b < q.bin_count(); ++b) EXPECT_NEAR(q.bins[b], oracle[b], 1e-12) << b;
    }
  }
}

TEST(Transfer, NormalizedAndArgmaxInsideBin) {
  std::mt19937_64 rng(2);
  const Pair pair = random_pair(rng);
  const EpipolarPencil pencil(pair.a, pair.b);
  const TransferPlan plan(pencil, PencilView::kI);
  const Heatmap p = random_heatmap(rng, 32, 32);
  const EpipolarDistribution q = transfer(p.plane_view(0), plan);
  EXPECT_NEAR(plane_sum(q.bins), 1.0, 1e-9);
  for (int b = 0; b < q.bin_count(); ++b) {
    if (q.argmax_cells[b] < 0) {
      EXPECT_EQ(q.raw_max[b], 0.0);
      continue;
    }
    EXPECT_EQ(plan.cell_bins()[q.argmax_cells[b]], b);
    EXPECT_EQ(p.values()[q.argmax_cells[b]], q.raw_max[b]);
  }
}

TEST(Transfer, GaussianPeakBinAndCorrespondence) {
  std::mt19937_64 rng(3);
  int agree = 0;
  const int trials = 30;
  for (int trial = 0; trial < trials; ++trial) {
    const Pair pair = random_pair(rng);
    const EpipolarPencil pencil(pair.a, pair.b);
    const Eigen::Vector3d point = test::random_point(rng, 0.5);
    const Eigen::Vector2d xi = project(pair.a, point);
    const Eigen::Vector2d xj = project(pair.b, point);
    const Heatmap pi = render_gaussian(xi.array().round().matrix(), 1.0, 32, 32);
    const Heatmap pj = render_gaussian(xj.array().round().matrix(), 1.0, 32, 32);
    const EpipolarDistribution qi = transfer(pi.plane_view(0), pencil, PencilView::kI);
    const EpipolarDistribution qj = transfer(pj.plane_view(0), pencil, PencilView::kJ);
    const int peak_i = static_cast<int>(std::max_element(qi.bins.begin(), qi.bins.end()) - qi.bins.begin());
    const int peak_j = static_cast<int>(std::max_element(qj.bins.begin(), qj.bins.end()) - qj.bins.begin());
    const auto bin_at = [&](PencilView view, const Eigen::Vector2d& x) {
      return pencil.bin_of_theta(theta_of_pixel(pencil, view, x));
    };
    EXPECT_EQ(peak_i, bin_at(PencilView::kI, xi.array().round().matrix()));
    EXPECT_EQ(peak_j, bin_at(PencilView::kJ, xj.array().round().matrix()));
    // Unrounded projections of one point share a bin, up to a boundary.
    if (std::abs(bin_at(PencilView::kI, xi) - bin_at(PencilView::kJ, xj)) <= 1) ++agree;
  }
  EXPECT_EQ(agree, trials);
}

TEST(Transfer, SpuriousModeOnSameLineKeepsPeak) {
  std::mt19937_64 rng(4);
  const Pair pair = random_pair(rng);
  const EpipolarPencil pencil(pair.a, pair.b);
  const TransferPlan plan(pencil, PencilView::kI);
  const Heatmap single = render_gaussian({16, 16}, 1.0, 32, 32);
  const int bin = plan.cell_bins()[16 * 32 + 16];
  // Second mode on another cell of the same bin, far from the first.
  int other = -1;
  for (int k = 0; k < 32 * 32; ++k) {
    const int x = k % 32, y = k / 32;
    if (plan.cell_bins()[k] == bin && std::hypot(x - 16, y - 16) > 8) other = k;
  }
  ASSERT_GE(other, 0);
  Heatmap two = single;
  for (double& v : two.values()) v *= 0.6;
  two.values()[other] += 0.4;
  const EpipolarDistribution q1 = transfer(single.plane_view(0), plan);
  const EpipolarDistribution q2 = transfer(two.plane_view(0), plan);
  const auto peak = [](const EpipolarDistribution& q) {
    return std::max_element(q.bins.begin(), q.bins.end()) - q.bins.begin();
  };
  EXPECT_EQ(peak(q1), bin);
  EXPECT_EQ(peak(q2), bin);
}

TEST(Transfer, ShapeMismatch) {
  std::mt19937_64 rng(5);
  const Pair pair = random_pair(rng);
  const EpipolarPencil pencil(pair.a, pair.b);
  const Heatmap small(16, 16, 1, 1.0 / 256);
  EXPECT_THROW(transfer(small.plane_view(0), pencil, PencilView::kI), Error);
}

TEST(CrossView, MatchedCloudsBeatMismatched) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Pair pair = random_pair(rng);
    const EpipolarPencil pencil(pair.a, pair.b);
    const Eigen::Vector3d p = test::random_point(rng, 0.5);
    Eigen::Vector3d other = test::random_point(rng, 0.5);
    const Heatmap pi = render_gaussian(project(pair.a, p), 1.0, 32, 32);
    const Heatmap pj = render_gaussian(project(pair.b, p), 1.0, 32, 32);
    const Heatmap wrong = render_gaussian(project(pair.b, other), 1.0, 32, 32);
    const double theta_p = theta_of_pixel(pencil, PencilView::kI, project(pair.a, p));
    const double theta_o = theta_of_pixel(pencil, PencilView::kI, project(pair.a, other));
    if (std::abs(std::remainder(theta_p - theta_o, M_PI)) < 0.1) continue;
    const double matched = cross_view_loss(pi.plane_view(0), pj.plane_view(0), pencil).value;
    const double mismatched = cross_view_loss(pi.plane_view(0), wrong.plane_view(0), pencil).value;
    EXPECT_LT(matched, mismatched);
  }
}

TEST(CrossView, ZeroForIdenticalAndSymmetricInPair) {
  std::mt19937_64 rng(7);
  const Pair pair = random_pair(rng);
  const EpipolarPencil pencil(pair.a, pair.b);
  const TransferPlan plan_i(pencil, PencilView::kI);
  const TransferPlan plan_j(pencil, PencilView::kJ);
  const Heatmap p = random_heatmap(rng, 32, 32);
  const Heatmap q = random_heatmap(rng, 32, 32);
  EXPECT_NEAR(cross_view_loss(p.plane_view(0), p.plane_view(0), plan_i, plan_i).value, 0.0, 1e-9);
  const CrossViewResult ij = cross_view_loss(p.plane_view(0), q.plane_view(0), plan_i, plan_j);
  const CrossViewResult ji = cross_view_loss(q.plane_view(0), p.plane_view(0), plan_j, plan_i);
  EXPECT_NEAR(ij.value, ji.value, 1e-12);
  for (std::size_t k = 0; k < ij.grad_i.size(); ++k) {
    EXPECT_NEAR(ij.grad_i[k], ji.grad_j[k], 1e-12);
  }
  EXPECT_NEAR(cross_view_value(p.plane_view(0), q.plane_view(0), plan_i, plan_j), ij.value, 1e-15);
}

TEST(CrossView, GradientMatchesFiniteDifferencesAndIsSparse) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    const Pair pair = random_pair(rng, 16);
    const EpipolarPencil pencil(pair.a, pair.b);
    const TransferPlan plan_i(pencil, PencilView::kI);
    const TransferPlan plan_j(pencil, PencilView::kJ);
    const Heatmap pi = random_heatmap(rng, 16, 16);
    const Heatmap pj = random_heatmap(rng, 16, 16);
    const CrossViewResult r = cross_view_loss(pi.plane_view(0), pj.plane_view(0), plan_i, plan_j);
    std::vector<double> xi(pi.values().begin(), pi.values().end());
    std::vector<double> xj(pj.values().begin(), pj.values().end());
    const double ei = test::max_gradient_error(
        [&](std::span<const double> x) {
          return cross_view_value({16, 16, x}, pj.plane_view(0), plan_i, plan_j);
        },
        xi, r.grad_i, 1e-7);
    const double ej = test::max_gradient_error(
        [&](std::span<const double> x) {
          return cross_view_value(pi.plane_view(0), {16, 16, x}, plan_i, plan_j);
        },
        xj, r.grad_j, 1e-7);
    EXPECT_LT(ei, 1e-4);
    EXPECT_LT(ej, 1e-4);

    const EpipolarDistribution q = transfer(pi.plane_view(0), plan_i);
    std::vector<bool> selected(xi.size(), false);
    for (int cell : q.argmax_cells) {
      if (cell >= 0) selected[cell] = true;
    }
    for (std::size_t k = 0; k < xi.size(); ++k) {
      if (!selected[k]) {
        EXPECT_EQ(r.grad_i[k], 0.0);
      }
    }
  }
}

TEST(Backproject, PeakLinePassesThroughCorrespondence) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Pair pair = random_pair(rng);
    const EpipolarPencil pencil(pair.a, pair.b);
    const TransferPlan plan_i(pencil, PencilView::kI);
    const TransferPlan plan_j(pencil, PencilView::kJ);
    const Eigen::Vector3d point = test::random_point(rng, 0.5);
    const Eigen::Vector2d xi = project(pair.a, point).array().round().matrix();
    const Eigen::Vector2d xj = project(pair.b, point);
    const Heatmap pi = render_gaussian(xi, 1.0, 32, 32);
    const EpipolarDistribution q = transfer(pi.plane_view(0), plan_i);
    const Heatmap back = backproject(q, plan_j);
    EXPECT_NEAR(plane_sum(back.values()), 1.0, 1e-9);
    const double peak = *std::max_element(back.values().begin(), back.values().end());
    // Some cell within one cell of the corresponding point carries the peak value.
    bool found = false;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = static_cast<int>(std::round(xj.x())) + dx;
        const int y = static_cast<int>(std::round(xj.y())) + dy;
        if (x >= 0 && y >= 0 && x < 32 && y < 32 && back.at(x, y, 0) == peak) found = true;
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST(Backproject, RoundTripKeepsArgmaxBin) {
  std::mt19937_64 rng(10);
  const Pair pair = random_pair(rng);
  const EpipolarPencil pencil(pair.a, pair.b);
  const TransferPlan plan_i(pencil, PencilView::kI);
  const Heatmap p = render_gaussian({12, 20}, 1.5, 32, 32);
  const EpipolarDistribution q = transfer(p.plane_view(0), plan_i);
  const Heatmap back = backproject(q, plan_i);
  const EpipolarDistribution again = transfer(back.plane_view(0), plan_i);
  const auto peak = [](const EpipolarDistribution& d) {
    return std::max_element(d.bins.begin(), d.bins.end()) - d.bins.begin();
  };
  EXPECT_EQ(peak(q), peak(again));
}

TEST(Backproject, UniformDistributionPaintsOccupiedCellsEvenly) {
  std::mt19937_64 rng(11);
  const Pair pair = random_pair(rng);
  const EpipolarPencil pencil(pair.a, pair.b);
  const TransferPlan plan(pencil, PencilView::kJ);
  EpipolarDistribution q;
  q.bins.assign(pencil.bin_count(), 1.0 / pencil.bin_count());
  const Heatmap back = backproject(q, plan);
  double first = -1.0;
  for (std::size_t k = 0; k < back.values().size(); ++k) {
    if (plan.cell_bins()[k] < 0) continue;
    if (first < 0) first = back.values()[k];
    EXPECT_NEAR(back.values()[k], first, 1e-15);
  }
}
