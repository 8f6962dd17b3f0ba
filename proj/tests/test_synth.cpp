#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Geometry>

#include "mvkp/error.hpp"
#include "mvkp/heatmap.hpp"
#include "mvkp/supervise.hpp"
#include "mvkp/synth.hpp"
#include "mvkp/temporal.hpp"
#include "mvkp/visibility.hpp"

using namespace mvkp;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.views = 6;
  c.frames = 12;
  c.channels = 4;
  return c;
}

bool gray(const Image& image, int x, int y) {
  const double r = image.at(x, y, 0), g = image.at(x, y, 1), b = image.at(x, y, 2);
  return std::abs(r - g) < 0.1 && std::abs(g - b) < 0.1;
}

}  // namespace

TEST(Generate, DefaultSceneSatisfiesInvariants) {
  const Scene scene = generate(SynthConfig{}, 0);
  ASSERT_EQ(scene.view_count(), 8);
  ASSERT_EQ(scene.frame_count(), 50);
  ASSERT_EQ(scene.channel_count(), 6);
  for (int t = 0; t < scene.frame_count(); ++t) {
    const auto points = scene.keypoints(t);
    ASSERT_EQ(points.size(), 5u);
    for (std::size_t k = 0; k < points.size(); ++k) {
      EXPECT_FALSE(scene.occluders(t).contains(points[k]));
      if (t > 0) {
        EXPECT_LE((points[k] - scene.keypoints(t - 1)[k]).norm(), 0.2 * scene.diameter);
      }
      for (const Camera& cam : scene.cameras) {
        const Eigen::Vector2d x = project(cam, points[k]);
        EXPECT_GE(x.x(), -0.5);
        EXPECT_GE(x.y(), -0.5);
        EXPECT_LE(x.x(), kGridSize - 0.5);
        EXPECT_LE(x.y(), kGridSize - 0.5);
      }
    }
  }
}

TEST(Generate, DeterministicPerSeed) {
  const Scene a = generate(small_config(), 3);
  const Scene b = generate(small_config(), 3);
  const Scene c = generate(small_config(), 4);
  EXPECT_EQ(a.cameras, b.cameras);
  EXPECT_EQ(a.keypoints(5), b.keypoints(5));
  EXPECT_NE(a.keypoints(5), c.keypoints(5));
  EXPECT_EQ(render(a, 2, 7), render(b, 2, 7));
}

TEST(Generate, RejectsBadConfig) {
  SynthConfig c = small_config();
  c.views = 1;
  EXPECT_THROW(generate(c, 0), Error);
  c = small_config();
  c.frames = 1;
  EXPECT_THROW(generate(c, 0), Error);
  c = small_config();
  c.channels = 1;
  EXPECT_THROW(generate(c, 0), Error);
  c = small_config();
  c.clutter = -1.0;
  try {
    generate(c, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigInvalid);
  }
}

TEST(GroundTruth, EpipolarResidualsVanish) {
  const Scene scene = generate(SynthConfig{}, 1);
  for (int i = 0; i < scene.view_count(); ++i) {
    for (int j = 0; j < scene.view_count(); ++j) {
      if (i == j) continue;
      const FundamentalMatrix f = fundamental_from_cameras(scene.cameras[i], scene.cameras[j]);
      for (int t : {0, 17, 49}) {
        for (const Eigen::Vector3d& p : scene.keypoints(t)) {
          const Eigen::Vector3d line = epipolar_line(f, project(scene.cameras[i], p));
          EXPECT_LT(std::abs(line.dot(project(scene.cameras[j], p).homogeneous())), 1e-9);
        }
      }
    }
  }
}

TEST(GroundTruth, ArgmaxIsProjectedCellAndSelfConsistent) {
  const Scene scene = generate(small_config(), 2);
  for (int v = 0; v < scene.view_count(); ++v) {
    const GroundTruth gt = ground_truth(scene, v, 4);
    const auto points = scene.keypoints(4);
    for (int c = 0; c + 1 < scene.channel_count(); ++c) {
      const Eigen::Vector2d x = project(scene.cameras[v], points[c]);
      const Eigen::Vector2d cell = x.array().round().matrix();
      EXPECT_EQ(argmax_peak(gt.heatmap, c), cell);
      ASSERT_TRUE(gt.annotation.channels[c].has_value());
      EXPECT_EQ(gt.annotation.channels[c]->pixel, cell);
      const bool visible = raycast_visibility(points[c], scene.cameras[v], scene.occluders(4));
      EXPECT_EQ(gt.annotation.channels[c]->visible, visible);
      EXPECT_EQ(gt.visibility.at(0, 0, c), visible ? kVisibleLabel : kOccludedLabel);
    }
    EXPECT_LT(label_loss(gt.heatmap, gt.visibility, gt.annotation, scene.config.sigma_gt).value,
              1e-6);
  }
}

TEST(GroundTruth, AdjacentViewsAgreeMoreOnVisibility) {
  long adjacent = 0, adjacent_pairs = 0, distant = 0, distant_pairs = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig c;
    c.frames = 10;
    const Scene scene = generate(c, seed);
    const int n = scene.view_count();
    for (int t = 0; t < scene.frame_count(); ++t) {
      std::vector<Annotation> views;
      for (int v = 0; v < n; ++v) views.push_back(ground_truth(scene, v, t).annotation);
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const int gap = std::min(j - i, n - (j - i));
          for (int k = 0; k + 1 < scene.channel_count(); ++k) {
            const long agree = views[i].channels[k]->visible == views[j].channels[k]->visible;
            if (gap == 1) {
              adjacent += agree;
              ++adjacent_pairs;
            } else {
              distant += agree;
              ++distant_pairs;
            }
          }
        }
      }
    }
  }
  EXPECT_GE(static_cast<double>(adjacent) / adjacent_pairs,
            static_cast<double>(distant) / distant_pairs);
}

TEST(GroundTruthFlow, WarpedTruthMatchesTruth) {
  const Scene scene = generate(SynthConfig{}, 3);
  for (int v = 0; v < scene.view_count(); ++v) {
    for (auto [t1, t2] : {std::pair{10, 11}, std::pair{11, 10}, std::pair{20, 22}}) {
      const GroundTruth g1 = ground_truth(scene, v, t1);
      const GroundTruth g2 = ground_truth(scene, v, t2);
      const FlowField flow = ground_truth_flow(scene, v, t1, t2);
      for (int c = 0; c + 1 < scene.channel_count(); ++c) {
        // A cell holds one displacement; keypoints sharing a t1 cell can't all be exact.
        bool shared = false;
        for (int o = 0; o + 1 < scene.channel_count(); ++o) {
          if (o != c && g1.annotation.channels[o]->pixel == g1.annotation.channels[c]->pixel) {
            shared = true;
          }
        }
        if (shared) continue;
        const WarpResult w = warp(g2.heatmap.plane_view(c), flow);
        EXPECT_EQ(argmax_peak(w.warped.view()), argmax_peak(g1.heatmap, c))
            << "view " << v << " channel " << c << " t " << t1 << "->" << t2;
      }
    }
  }
}

TEST(GroundTruthFlow, SameFrameIsZeroAndNoiseIsSeeded) {
  const Scene scene = generate(small_config(), 4);
  const FlowField still = ground_truth_flow(scene, 1, 5, 5);
  for (double v : still.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(ground_truth_flow(scene, 1, 5, 6), ground_truth_flow(scene, 1, 5, 6));
  EXPECT_EQ(ground_truth_flow(scene, 1, 5, 6, 0.5, 9), ground_truth_flow(scene, 1, 5, 6, 0.5, 9));
  EXPECT_FALSE(ground_truth_flow(scene, 1, 5, 6, 0.5, 9) == ground_truth_flow(scene, 1, 5, 6));
}

TEST(Render, BlobsFollowVisibility) {
  SynthConfig c;
  c.pixel_noise = 0.0;
  int visible_checked = 0, hidden_checked = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Scene scene = generate(c, seed);
    for (int t : {0, 25}) {
      for (int v = 0; v < scene.view_count(); ++v) {
        const Image image = render(scene, v, t);
        const GroundTruth gt = ground_truth(scene, v, t);
        const int keypoints = scene.channel_count() - 1;
        for (int k = 0; k < keypoints; ++k) {
          const Eigen::Vector2d cell = gt.annotation.channels[k]->pixel;
          // Skip cells another keypoint's blob could reach.
          bool crowded = false;
          for (int o = 0; o < keypoints; ++o) {
            if (o != k && (gt.annotation.channels[o]->pixel - cell).norm() < 4.0) crowded = true;
          }
          if (crowded) continue;
          const int x = static_cast<int>(2 * cell.x()), y = static_cast<int>(2 * cell.y());
          if (gt.annotation.channels[k]->visible) {
            const Eigen::Vector3d rgb(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
            EXPECT_LT((rgb - scene.colors[k]).norm(), 0.25) << seed << " " << v << " " << k;
            ++visible_checked;
          } else {
            EXPECT_TRUE(gray(image, x, y)) << seed << " " << v << " " << k;
            ++hidden_checked;
          }
        }
      }
    }
  }
  EXPECT_GT(visible_checked, 50);
  EXPECT_GT(hidden_checked, 5);
}

TEST(Render, ClutterOnlyWhereDriftIs) {
  SynthConfig c = small_config();
  c.drift = 1.0;
  c.clutter = 6.0;
  c.clutter_size = 8;
  const Scene scene = generate(c, 5);
  SynthConfig plain_config = c;
  plain_config.clutter = 0.0;
  const Scene plain = generate(plain_config, 5);
  // Drift vanishes at both ends of the sequence.
  EXPECT_EQ(scene.drift_level(0, 0), 0.0);
  EXPECT_EQ(render(scene, 0, 0), render(plain, 0, 0));
  EXPECT_EQ(render(scene, 3, c.frames - 1), render(plain, 3, c.frames - 1));
  double peak = 0.0;
  for (int v = 0; v < c.views; ++v) {
    for (int t = 0; t < c.frames; ++t) {
      EXPECT_GE(scene.drift_level(v, t), 0.0);
      EXPECT_LE(scene.drift_level(v, t), 1.0);
      peak = std::max(peak, scene.drift_level(v, t));
    }
  }
  EXPECT_GT(peak, 0.5);
}
