#include "mvkp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "mvkp/error.hpp"
#include "mvkp/supervise.hpp"

namespace mvkp {
namespace {

constexpr int kMaxAttempts = 200;
constexpr double kPi = std::numbers::pi;

Eigen::Vector3d hue_color(double hue) {
  // Fully saturated HSV colour with V = 0.95, S = 0.9.
  const double h = std::fmod(hue / (2.0 * kPi) * 6.0 + 6.0, 6.0);
  const double c = 0.95 * 0.9;
  const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  const double m = 0.95 - c;
  Eigen::Vector3d rgb;
  switch (static_cast<int>(h)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  return rgb + Eigen::Vector3d::Constant(m);
}

Eigen::Vector2i grid_cell(const Camera& camera, const Eigen::Vector3d& point) {
  const Eigen::Vector2d x = project(camera, point);
  return {std::clamp(static_cast<int>(std::lround(x.x())), 0, camera.image_width() - 1),
          std::clamp(static_cast<int>(std::lround(x.y())), 0, camera.image_height() - 1)};
}

// Nearest positive ray parameter at which the ray enters a primitive, with
// the surface normal there.
bool hit_sphere(const Ray& ray, const Sphere& s, double& depth, Eigen::Vector3d& normal) {
  const Eigen::Vector3d oc = ray.origin - s.center;
  const double b = ray.direction.dot(oc);
  const double disc = b * b - (oc.squaredNorm() - s.radius * s.radius);
  if (disc < 0.0) return false;
  const double lambda = -b - std::sqrt(disc);
  if (lambda <= 0.0) return false;
  depth = lambda;
  normal = (ray.point_at(lambda) - s.center) / s.radius;
  return true;
}

bool hit_box(const Ray& ray, const Box& box, double& depth, Eigen::Vector3d& normal) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int axis = 0;
  for (int k = 0; k < 3; ++k) {
    const double d = ray.direction(k);
    if (d == 0.0) {
      if (ray.origin(k) <= box.min(k) || ray.origin(k) >= box.max(k)) return false;
      continue;
    }
    double t0 = (box.min(k) - ray.origin(k)) / d;
    double t1 = (box.max(k) - ray.origin(k)) / d;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_enter) {
      t_enter = t0;
      axis = k;
    }
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit || t_enter <= 0.0) return false;
  depth = t_enter;
  normal = Eigen::Vector3d::Zero();
  normal(axis) = ray.direction(axis) > 0.0 ? -1.0 : 1.0;
  return true;
}

std::mt19937_64 image_rng(std::uint64_t seed, int view, int t) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(view), static_cast<std::uint32_t>(t)};
  return std::mt19937_64(seq);
}

bool scene_is_valid(const Scene& scene) {
  const SynthConfig& cfg = scene.config;
  const int keypoints = cfg.channels - 1;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  std::vector<std::vector<Eigen::Vector3d>> frames(cfg.frames);
  for (int t = 0; t < cfg.frames; ++t) {
    frames[t] = scene.keypoints(t);
    const OccluderSet occluders = scene.occluders(t);
    for (const Eigen::Vector3d& x : frames[t]) {
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
      if ((x - scene.torso(t)).norm() < cfg.torso_radius + 0.05) return false;
      if (occluders.contains(x)) return false;
      for (const Camera& cam : scene.cameras) {
        if (cam.to_camera(x).z() < 0.5) return false;
        const Eigen::Vector2d p = project(cam, x);
        if (p.x() < 1.0 || p.y() < 1.0 || p.x() > cam.image_width() - 2.0 ||
            p.y() > cam.image_height() - 2.0) {
          return false;
        }
      }
    }
  }
  const double diameter = (hi - lo).norm();
  for (int t = 1; t < cfg.frames; ++t) {
    for (int k = 0; k < keypoints; ++k) {
      if ((frames[t][k] - frames[t - 1][k]).norm() > 0.2 * diameter) return false;
    }
  }
  for (const Camera& cam : scene.cameras) {
    for (const Box& box : scene.static_boxes) {
      if (OccluderSet{{}, {box}}.contains(cam.center())) return false;
    }
  }
  return true;
}

}  // namespace

void SynthConfig::validate() const {
  require(views >= 2, ErrorCode::kConfigInvalid, "scene needs at least two views");
  require(frames >= 2, ErrorCode::kConfigInvalid, "scene needs at least two frames");
  require(channels >= 2, ErrorCode::kConfigInvalid, "scene needs at least two channels");
  require(ring_radius > 0.0 && focal > 0.0, ErrorCode::kConfigInvalid,
          "ring radius and focal length must be positive");
  require(torso_radius > 0.0 && limb_length > torso_radius, ErrorCode::kConfigInvalid,
          "limbs must reach outside the torso");
  require(height_jitter >= 0.0 && sway_amplitude >= 0.0 && limb_amplitude >= 0.0,
          ErrorCode::kConfigInvalid, "amplitudes must be non-negative");
  require(static_boxes >= 0, ErrorCode::kConfigInvalid, "static box count must be non-negative");
  require(blob_sigma > 0.0 && pixel_noise >= 0.0, ErrorCode::kConfigInvalid,
          "bad appearance parameters");
  require(drift >= 0.0 && drift <= 1.0, ErrorCode::kConfigInvalid, "drift must lie in [0, 1]");
  require(clutter >= 0.0 && clutter_size >= 1, ErrorCode::kConfigInvalid, "bad clutter parameters");
  require(sigma_gt > 0.0 && flow_sigma > 0.0 && flow_background > 0.0,
          ErrorCode::kConfigInvalid, "ground-truth widths must be positive");
}

Eigen::Vector3d Scene::torso(int t) const { return torso_base + sway(t); }

std::vector<Eigen::Vector3d> Scene::keypoints(int t) const {
  std::vector<Eigen::Vector3d> out;
  out.reserve(keypoint_base.size());
  for (std::size_t k = 0; k < keypoint_base.size(); ++k) {
    out.push_back(keypoint_base[k] + sway(t) + keypoint_motion[k][0](t) + keypoint_motion[k][1](t));
  }
  return out;
}

OccluderSet Scene::occluders(int t) const {
  OccluderSet set;
  set.spheres.push_back({torso(t), config.torso_radius});
  set.boxes = static_boxes;
  return set;
}

double Scene::drift_level(int view, int t) const {
  if (config.drift <= 0.0 || t <= 0 || t >= config.frames - 1) return 0.0;
  const double s = static_cast<double>(t) / (config.frames - 1);
  const double bump = std::pow(std::sin(kPi * s), 2);
  const Eigen::Vector3d c = cameras[view].center();
  const double azimuth = std::atan2(c.y(), c.x());
  const double facing = 0.5 + 0.5 * std::cos(azimuth - light_phase - kPi * s);
  return config.drift * bump * facing;
}

Scene generate(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  const int keypoints = config.channels - 1;

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Scene scene;
    scene.config = config;
    scene.seed = seed;

    const double ring_phase = angle(rng);
    for (int v = 0; v < config.views; ++v) {
      const double a = ring_phase + 2.0 * kPi * v / config.views;
      const Eigen::Vector3d center(config.ring_radius * std::cos(a),
                                   config.ring_radius * std::sin(a),
                                   config.camera_height + config.height_jitter * unit(rng));
      scene.cameras.push_back(Camera::look_at(center, Eigen::Vector3d::Zero(),
                                              Eigen::Vector3d::UnitZ(), config.focal, kGridSize,
                                              kGridSize));
    }

    scene.sway.amplitude = config.sway_amplitude *
                           Eigen::Vector3d(unit(rng), unit(rng), 0.3 * unit(rng));
    scene.sway.frequency = 2.0 * kPi / (20.0 + 20.0 * (0.5 + 0.5 * unit(rng)));
    scene.sway.phase = angle(rng);

    const double limb_phase = angle(rng);
    for (int k = 0; k < keypoints; ++k) {
      const double azimuth = limb_phase + 2.0 * kPi * k / keypoints + 0.3 * unit(rng);
      const double elevation = 0.5 * unit(rng);
      const Eigen::Vector3d dir(std::cos(elevation) * std::cos(azimuth),
                                std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
      scene.keypoint_base.push_back(scene.torso_base + config.limb_length * dir);
      std::array<Sinusoid, 2> motion;
      for (Sinusoid& s : motion) {
        s.amplitude = config.limb_amplitude * Eigen::Vector3d(unit(rng), unit(rng), unit(rng)) /
                      std::sqrt(3.0);
        s.frequency = 2.0 * kPi / (16.0 + 24.0 * (0.5 + 0.5 * unit(rng)));
        s.phase = angle(rng);
      }
      scene.keypoint_motion.push_back(motion);
      scene.colors.push_back(hue_color(2.0 * kPi * k / keypoints));
    }

    for (int b = 0; b < config.static_boxes; ++b) {
      const double a = angle(rng);
      const double rho = 2.2 + 0.8 * (0.5 + 0.5 * unit(rng));
      const Eigen::Vector3d c(rho * std::cos(a), rho * std::sin(a), 0.0);
      const Eigen::Vector3d half(0.15, 0.15, 1.5);
      scene.static_boxes.push_back({c - half, c + half});
    }
    scene.light_phase = angle(rng);

    if (!scene_is_valid(scene)) continue;

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (int t = 0; t < config.frames; ++t) {
      for (const Eigen::Vector3d& x : scene.keypoints(t)) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
      }
    }
    scene.diameter = (hi - lo).norm();
    return scene;
  }
  fail(ErrorCode::kConfigInvalid, "no valid scene found for this configuration");
}

Image render(const Scene& scene, int view, int t) {
  require(view >= 0 && view < scene.view_count() && t >= 0 && t < scene.frame_count(),
          ErrorCode::kInvalidArgument, "render index out of range");
  const Camera camera = scene.cameras[view].scaled(2);
  const int w = camera.image_width();
  const int h = camera.image_height();
  const OccluderSet occluders = scene.occluders(t);
  const Eigen::Vector3d light = Eigen::Vector3d(0.3, 0.5, 0.8).normalized();

  Image image(w, h, 3);
  auto put = [&](int x, int y, const Eigen::Vector3d& rgb) {
    for (int c = 0; c < 3; ++c) image.at(x, y, c) = rgb(c);
  };
  auto get = [&](int x, int y) {
    return Eigen::Vector3d(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
  };

  // Fixed background, then occluders by per-pixel ray casting.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double shade = 0.36 + 0.06 * static_cast<double>(y) / (h - 1);
      Eigen::Vector3d rgb(shade, shade + 0.02, shade + 0.04);
      const Ray ray = inverse_ray(camera, Eigen::Vector2d(x, y));
      double nearest = std::numeric_limits<double>::infinity();
      Eigen::Vector3d normal;
      double depth;
      Eigen::Vector3d n;
      for (const Sphere& s : occluders.spheres) {
        if (hit_sphere(ray, s, depth, n) && depth < nearest) {
          nearest = depth;
          normal = n;
        }
      }
      for (const Box& b : occluders.boxes) {
        if (hit_box(ray, b, depth, n) && depth < nearest) {
          nearest = depth;
          normal = n;
        }
      }
      if (std::isfinite(nearest)) {
        rgb = Eigen::Vector3d::Constant(0.45 + 0.3 * std::max(0.0, normal.dot(light)));
      }
      put(x, y, rgb);
    }
  }

  std::mt19937_64 rng = image_rng(scene.seed, view, t);
  const double level = scene.drift_level(view, t);
  if (scene.config.clutter > 0.0 && level > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int count = static_cast<int>(std::floor(level * scene.config.clutter + unit(rng)));
    const int side = scene.config.clutter_size;
    std::uniform_int_distribution<int> corner(1, w - 1 - side);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(scene.colors.size()) - 1);
    for (int n = 0; n < count; ++n) {
      const int x0 = corner(rng);
      const int y0 = corner(rng);
      const Eigen::Vector3d& color = scene.colors[pick(rng)];
      for (int y = y0; y < y0 + side; ++y) {
        for (int x = x0; x < x0 + side; ++x) put(x, y, color);
      }
    }
  }

  // Visible keypoints as blobs, far to near.
  const std::vector<Eigen::Vector3d> points = scene.keypoints(t);
  const Camera& grid_camera = scene.cameras[view];
  std::vector<int> order(points.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return grid_camera.to_camera(points[a]).z() > grid_camera.to_camera(points[b]).z();
  });
  const double inv = 1.0 / (2.0 * scene.config.blob_sigma * scene.config.blob_sigma);
  for (int k : order) {
    if (!raycast_visibility(points[k], grid_camera, occluders)) continue;
    const Eigen::Vector2i cell = grid_cell(grid_camera, points[k]);
    const Eigen::Vector2d center(2.0 * cell.x() + 0.5, 2.0 * cell.y() + 0.5);
    const int reach = static_cast<int>(std::ceil(3.5 * scene.config.blob_sigma));
    for (int y = std::max(0, static_cast<int>(center.y()) - reach);
         y <= std::min(h - 1, static_cast<int>(center.y()) + reach + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(center.x()) - reach);
           x <= std::min(w - 1, static_cast<int>(center.x()) + reach + 1); ++x) {
        const double d2 = (Eigen::Vector2d(x, y) - center).squaredNorm();
        const double a = std::exp(-d2 * inv);
        put(x, y, (1.0 - a) * get(x, y) + a * scene.colors[k]);
      }
    }
  }

  // Illumination drift: hue rotation about the grey axis plus dimming.
  if (level > 0.0) {
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(level * scene.config.drift_hue, Eigen::Vector3d::Ones().normalized())
            .toRotationMatrix();
    const double gain = 1.0 - 0.3 * level;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) put(x, y, gain * (rot * get(x, y)));
    }
  }

  if (scene.config.pixel_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, scene.config.pixel_noise);
    for (double& value : image.values()) value += noise(rng);
  }
  for (double& value : image.values()) value = std::clamp(value, 0.0, 1.0);
  return image;
}

GroundTruth ground_truth(const Scene& scene, int view, int t) {
  require(view >= 0 && view < scene.view_count() && t >= 0 && t < scene.frame_count(),
          ErrorCode::kInvalidArgument, "ground truth index out of range");
  const Camera& camera = scene.cameras[view];
  const OccluderSet occluders = scene.occluders(t);
  const std::vector<Eigen::Vector3d> points = scene.keypoints(t);
  GroundTruth gt;
  gt.annotation = Annotation(scene.channel_count());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Eigen::Vector2i cell = grid_cell(camera, points[k]);
    gt.annotation.channels[k] = KeypointLabel{
        cell.cast<double>(), raycast_visibility(points[k], camera, occluders) == 1,
        Provenance::kHuman};
  }
  gt.heatmap = label_heatmap(gt.annotation, scene.config.sigma_gt, camera.image_width(),
                             camera.image_height());
  gt.visibility = render_visibility_label(points, camera, occluders);
  return gt;
}

FlowField ground_truth_flow(const Scene& scene, int view, int t1, int t2, double noise_sigma,
                            std::uint64_t noise_seed) {
  require(view >= 0 && view < scene.view_count() && t1 >= 0 && t1 < scene.frame_count() &&
              t2 >= 0 && t2 < scene.frame_count(),
          ErrorCode::kInvalidArgument, "flow index out of range");
  require(noise_sigma >= 0.0, ErrorCode::kInvalidArgument, "flow noise must be non-negative");
  const Camera& camera = scene.cameras[view];
  const int w = camera.image_width();
  const int h = camera.image_height();
  FlowField flow(w, h, 2);
  if (t1 == t2) return flow;

  const std::vector<Eigen::Vector3d> p1 = scene.keypoints(t1);
  const std::vector<Eigen::Vector3d> p2 = scene.keypoints(t2);
  std::vector<Eigen::Vector2d> anchors;
  std::vector<Eigen::Vector2d> shifts;
  for (std::size_t k = 0; k < p1.size(); ++k) {
    const Eigen::Vector2i c1 = grid_cell(camera, p1[k]);
    const Eigen::Vector2i c2 = grid_cell(camera, p2[k]);
    anchors.push_back(c1.cast<double>());
    shifts.push_back((c2 - c1).cast<double>());
  }
  const double inv = 1.0 / (2.0 * scene.config.flow_sigma * scene.config.flow_sigma);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Eigen::Vector2d acc = Eigen::Vector2d::Zero();
      double total = scene.config.flow_background;
      for (std::size_t k = 0; k < anchors.size(); ++k) {
        const double weight = std::exp(-(Eigen::Vector2d(x, y) - anchors[k]).squaredNorm() * inv);
        acc += weight * shifts[k];
        total += weight;
      }
      flow.at(x, y, 0) = acc.x() / total;
      flow.at(x, y, 1) = acc.y() / total;
    }
  }
  // Keypoint cells carry their displacement exactly; the first channel wins
  // when two keypoints share a cell.
  for (std::size_t k = anchors.size(); k-- > 0;) {
    const int x = static_cast<int>(anchors[k].x());
    const int y = static_cast<int>(anchors[k].y());
    flow.at(x, y, 0) = shifts[k].x();
    flow.at(x, y, 1) = shifts[k].y();
  }
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (double& value : flow.values()) value += noise(rng);
  }
  return flow;
}

}  // namespace mvkp
