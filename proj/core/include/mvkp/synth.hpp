#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mvkp/geometry.hpp"
#include "mvkp/grid.hpp"
#include "mvkp/heatmap.hpp"
#include "mvkp/visibility.hpp"

namespace mvkp {

struct SynthConfig {
  int views = 8;
  int frames = 50;
  int channels = 6;  // keypoints plus background

  // Rig: ring of cameras around the origin, looking at it.
  double ring_radius = 5.0;
  double camera_height = 0.8;
  double height_jitter = 0.3;
  double focal = 40.0;  // grid cells

  // Subject: a torso sphere with keypoints on a shell around it.
  double torso_radius = 0.55;
  double limb_length = 1.0;
  double sway_amplitude = 0.35;
  double limb_amplitude = 0.3;
  int static_boxes = 1;

  // Appearance.
  double blob_sigma = 1.4;  // image pixels
  double pixel_noise = 0.02;
  // Strength of the time- and view-dependent illumination change; zero at
  // both ends of the sequence.
  double drift = 0.0;
  double drift_hue = 0.6;  // radians of hue rotation at full drift
  // Keypoint-coloured square patches scattered over drifted images; an image
  // at full drift gets this many on average.
  double clutter = 0.0;
  int clutter_size = 4;  // image pixels

  // Ground truth.
  double sigma_gt = 1.0;
  double flow_sigma = 1.0;        // radial blend width, grid cells
  double flow_background = 1e-6;  // weight of the zero-motion background

  // Throws kConfigInvalid.
  void validate() const;
};

struct Sinusoid {
  Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();
  double frequency = 0.0;  // radians per frame
  double phase = 0.0;

  Eigen::Vector3d operator()(double t) const { return amplitude * std::sin(frequency * t + phase); }
};

struct Scene {
  SynthConfig config;
  std::uint64_t seed = 0;
  std::vector<Camera> cameras;  // heatmap-grid resolution
  Eigen::Vector3d torso_base = Eigen::Vector3d::Zero();
  Sinusoid sway;
  std::vector<Eigen::Vector3d> keypoint_base;
  std::vector<std::array<Sinusoid, 2>> keypoint_motion;
  std::vector<Box> static_boxes;
  std::vector<Eigen::Vector3d> colors;  // per keypoint channel, RGB
  double light_phase = 0.0;
  double diameter = 0.0;

  int view_count() const { return static_cast<int>(cameras.size()); }
  int frame_count() const { return config.frames; }
  int channel_count() const { return config.channels; }

  Eigen::Vector3d torso(int t) const;
  std::vector<Eigen::Vector3d> keypoints(int t) const;
  OccluderSet occluders(int t) const;
  // Illumination drift level of one image, in [0, drift].
  double drift_level(int view, int t) const;
};

Scene generate(const SynthConfig& config, std::uint64_t seed);

// 64x64 RGB rendering of one view at one frame.
Image render(const Scene& scene, int view, int t);

struct GroundTruth {
  Heatmap heatmap;
  VisibilityMap visibility;
  Annotation annotation;  // pixels are the rounded projection cells
};

GroundTruth ground_truth(const Scene& scene, int view, int t);

// Backward flow on the t1 grid: the cell holding a keypoint at t1 maps to
// that keypoint's cell at t2; elsewhere a radial blend of the keypoint
// displacements fading to zero.
FlowField ground_truth_flow(const Scene& scene, int view, int t1, int t2,
                            double noise_sigma = 0.0, std::uint64_t noise_seed = 0);

}  // namespace mvkp
