#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "mvkp/error.hpp"
#include "mvkp/geometry.hpp"
#include "support.hpp"

using namespace mvkp;
using test::random_camera;
using test::random_point;

namespace {

Camera canonical(int w = 32, int h = 32) {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  return Camera(k, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), w, h);
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mvkp::Error";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(Camera, RejectsBadParameters) {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  EXPECT_EQ(code_of([&] { Camera(k, r, Eigen::Vector3d::Zero(), 0, 4); }),
            ErrorCode::kInvalidArgument);
  r(0, 0) = 2.0;
  EXPECT_EQ(code_of([&] { Camera(k, r, Eigen::Vector3d::Zero(), 4, 4); }),
            ErrorCode::kInvalidArgument);
}

TEST(Camera, LookAtCentersTarget) {
  const Camera cam = Camera::look_at({5, 0, 1}, {0, 0, 0.5}, Eigen::Vector3d::UnitZ(), 30, 32, 32);
  const Eigen::Vector2d x = project(cam, {0, 0, 0.5});
  EXPECT_NEAR(x.x(), 15.5, 1e-12);
  EXPECT_NEAR(x.y(), 15.5, 1e-12);
  // World up appears towards smaller rows.
  EXPECT_LT(project(cam, {0, 0, 1.0}).y(), x.y());
}

TEST(Camera, ScaledKeepsCellCenters) {
  std::mt19937_64 rng(3);
  const Camera cam = random_camera(rng);
  const Camera big = cam.scaled(2);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector3d p = random_point(rng);
    EXPECT_NEAR((project(big, p) - (2.0 * project(cam, p) + Eigen::Vector2d::Constant(0.5))).norm(),
                0.0, 1e-10);
  }
}

TEST(Project, CanonicalAndBehindCamera) {
  const Camera cam = canonical();
  const Eigen::Vector2d x = project(cam, {2, 4, 2});
  EXPECT_NEAR(x.x(), 1.0, 1e-15);
  EXPECT_NEAR(x.y(), 2.0, 1e-15);
  EXPECT_EQ(code_of([&] { project(cam, {1, 1, -1}); }), ErrorCode::kDegenerateDepth);
  EXPECT_EQ(code_of([&] { project(cam, {1, 1, 0}); }), ErrorCode::kDegenerateDepth);
}

TEST(Fundamental, EpipolarResidualOnRandomRigs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Camera a = random_camera(rng);
    const Camera b = random_camera(rng);
    const FundamentalMatrix f = fundamental_from_cameras(a, b);
    const Eigen::Matrix3d fn = f.matrix / f.matrix.cwiseAbs().maxCoeff();
    const Eigen::Vector3d p = random_point(rng);
    const Eigen::Vector3d xi = project(a, p).homogeneous();
    const Eigen::Vector3d xj = project(b, p).homogeneous();
    EXPECT_LT(std::abs(xj.dot(fn * xi)), 1e-9);
  }
}

TEST(Fundamental, CoincidentCentersRejected) {
  const Camera a = canonical();
  EXPECT_EQ(code_of([&] { fundamental_from_cameras(a, a); }), ErrorCode::kCoincidentCenters);
}

TEST(EpipolarLine, ContainsCorrespondingPointAndIsNormalized) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Camera a = random_camera(rng);
    const Camera b = random_camera(rng);
    const FundamentalMatrix f = fundamental_from_cameras(a, b);
    const Eigen::Vector3d p = random_point(rng);
    const Eigen::Vector3d line = epipolar_line(f, project(a, p));
    EXPECT_NEAR(line.head<2>().norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(line.dot(project(b, p).homogeneous())), 1e-9);
  }
}

TEST(EpipolarLine, EpipoleIsDegenerate) {
  std::mt19937_64 rng(6);
  const Camera a = random_camera(rng);
  const Camera b = random_camera(rng);
  const FundamentalMatrix f = fundamental_from_cameras(a, b);
  // Epipole in view i = projection of camera j's center.
  const Eigen::Vector3d e = a.projection_matrix() * b.center().homogeneous();
  EXPECT_EQ(code_of([&] { epipolar_line(f, e.hnormalized()); }), ErrorCode::kDegenerateLine);
}

TEST(InverseRay, RoundTripAndPrincipalRay) {
  const Ray principal = inverse_ray(canonical(), {0, 0});
  EXPECT_NEAR((principal.direction - Eigen::Vector3d::UnitZ()).norm(), 0.0, 1e-15);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    const Camera cam = random_camera(rng);
    const Eigen::Vector2d x(std::uniform_real_distribution<double>(0, 31)(rng),
                            std::uniform_real_distribution<double>(0, 31)(rng));
    const Ray ray = inverse_ray(cam, x);
    EXPECT_NEAR(ray.direction.norm(), 1.0, 1e-12);
    for (double lambda : {1.0, 10.0}) {
      EXPECT_LT((project(cam, ray.point_at(lambda)) - x).norm(), 1e-8);
    }
  }
}

TEST(Pencil, PlanesContainBothCenters) {
  std::mt19937_64 rng(21);
  const Camera a = random_camera(rng);
  const Camera b = random_camera(rng);
  const EpipolarPencil pencil(a, b);
  std::uniform_real_distribution<double> theta(0.0, M_PI);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector4d plane = plane_of_theta(pencil, theta(rng));
    EXPECT_LT(std::abs(plane.dot(a.center().homogeneous())), 1e-9);
    EXPECT_LT(std::abs(plane.dot(b.center().homogeneous())), 1e-9);
  }
  const Eigen::Vector4d p0 = plane_of_theta(pencil, 0.0);
  EXPECT_NEAR((p0.head<3>() - pencil.reference_normal()).norm(), 0.0, 1e-15);
  const double t = 0.4;
  EXPECT_NEAR(plane_of_theta(pencil, t).head<3>().dot(plane_of_theta(pencil, t + M_PI / 2).head<3>()),
              0.0, 1e-12);
}

TEST(Pencil, ReferenceNormalFallsBackForVerticalBaseline) {
  const Camera a = Camera::look_at({0, 0, 5}, {0, 0.1, 0}, Eigen::Vector3d::UnitY(), 30, 32, 32);
  const Camera b = Camera::look_at({0, 0, 9}, {0, 0.1, 0}, Eigen::Vector3d::UnitY(), 30, 32, 32);
  const EpipolarPencil pencil(a, b);
  EXPECT_NEAR(pencil.reference_normal().norm(), 1.0, 1e-12);
  EXPECT_NEAR(pencil.reference_normal().dot(pencil.baseline()), 0.0, 1e-12);
  EXPECT_TRUE(pencil.covers_full_circle());
}

TEST(Pencil, LineOfPlaneContainsPlanePoints) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const Camera a = random_camera(rng);
    const Camera b = random_camera(rng);
    const EpipolarPencil pencil(a, b);
    const Eigen::Vector3d p = random_point(rng);
    const double theta = theta_of_pixel(pencil, PencilView::kI, project(a, p));
    const Eigen::Vector4d plane = plane_of_theta(pencil, theta);
    EXPECT_LT(std::abs(plane.dot(p.homogeneous())), 1e-8);
    for (const Camera* cam : {&a, &b}) {
      const Eigen::Vector3d line = line_of_plane(*cam, plane);
      EXPECT_NEAR(line.head<2>().norm(), 1.0, 1e-12);
      EXPECT_LT(std::abs(line.dot(project(*cam, p).homogeneous())), 1e-8);
    }
    // Agrees with the fundamental-matrix line up to scale.
    const Eigen::Vector3d l_f = epipolar_line(fundamental_from_cameras(a, b), project(a, p));
    const Eigen::Vector3d l_p = line_of_plane(b, plane);
    EXPECT_LT(std::min((l_f - l_p).norm(), (l_f + l_p).norm()), 1e-8);
  }
}

TEST(Pencil, PlaneParallelToImageHasNoLine) {
  const Camera cam = canonical();
  EXPECT_EQ(code_of([&] { line_of_plane(cam, Eigen::Vector4d(0, 0, 1, 0)); }),
            ErrorCode::kPlaneThroughPrincipalAxis);
}

TEST(Pencil, ThetaRoundTripAndCorrespondence) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const Camera a = random_camera(rng);
    const Camera b = random_camera(rng);
    const EpipolarPencil pencil(a, b);
    const double theta = std::uniform_real_distribution<double>(0.0, M_PI)(rng);
    const Eigen::Vector3d line = line_of_plane(a, plane_of_theta(pencil, theta));
    // A point on the line: closest point to the image center.
    const Eigen::Vector2d c(15.5, 15.5);
    const Eigen::Vector2d x = c - (line.dot(c.homogeneous())) * line.head<2>();
    const double back = theta_of_pixel(pencil, PencilView::kI, x);
    const double diff = std::remainder(back - theta, M_PI);
    EXPECT_LT(std::abs(diff), 1e-8);

    const Eigen::Vector3d p = random_point(rng);
    const double ti = theta_of_pixel(pencil, PencilView::kI, project(a, p));
    const double tj = theta_of_pixel(pencil, PencilView::kJ, project(b, p));
    EXPECT_LT(std::abs(std::remainder(ti - tj, M_PI)), 1e-8);
    EXPECT_GE(ti, 0.0);
    EXPECT_LT(ti, M_PI);
  }
}

TEST(Pencil, EpipolePixelRejected) {
  std::mt19937_64 rng(24);
  const Camera a = random_camera(rng);
  const Camera b = random_camera(rng);
  const EpipolarPencil pencil(a, b);
  const Eigen::Vector3d e = a.projection_matrix() * b.center().homogeneous();
  EXPECT_EQ(code_of([&] { theta_of_pixel(pencil, PencilView::kI, e.hnormalized()); }),
            ErrorCode::kEpipolePixel);
}

TEST(Pencil, EveryCellFallsInABin) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    const Camera a = random_camera(rng);
    const Camera b = random_camera(rng);
    const EpipolarPencil pencil(a, b);
    for (PencilView view : {PencilView::kI, PencilView::kJ}) {
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
          EXPECT_GE(pencil.bin_of_theta(theta_of_pixel(pencil, view, Eigen::Vector2d(x, y))), 0);
        }
      }
    }
  }
}

TEST(Dlt, TwoNoiselessViews) {
  const Eigen::Vector3d target(1, 2, 5);
  const Camera a = Camera::look_at({8, 0, 3}, target, Eigen::Vector3d::UnitZ(), 30, 32, 32);
  const Camera b = Camera::look_at({0, 9, 6}, target, Eigen::Vector3d::UnitZ(), 30, 32, 32);
  const std::vector<Observation> obs{{a, project(a, target)}, {b, project(b, target)}};
  EXPECT_LT((triangulate_dlt(obs) - target).norm(), 1e-7 * target.norm());
}

TEST(Dlt, ReprojectionBelowToleranceForAllViewCounts) {
  std::mt19937_64 rng(31);
  for (int n = 2; n <= 16; ++n) {
    const Eigen::Vector3d p = random_point(rng);
    std::vector<Observation> obs;
    for (int k = 0; k < n; ++k) {
      const Camera cam = random_camera(rng);
      obs.push_back({cam, project(cam, p)});
    }
    const Eigen::Vector3d q = triangulate_dlt(obs);
    for (const Observation& o : obs) EXPECT_LT(reprojection_error(o, q), 1e-7);
  }
}

TEST(Dlt, MoreViewsAverageOutNoise) {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> noise(0.0, 0.5);
  double err2 = 0.0, err8 = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector3d p = random_point(rng, 0.5);
    std::vector<Observation> obs;
    for (int k = 0; k < 8; ++k) {
      const Camera cam = random_camera(rng);
      obs.push_back({cam, project(cam, p) + Eigen::Vector2d(noise(rng), noise(rng))});
    }
    err2 += (triangulate_dlt(std::span(obs).first(2)) - p).norm();
    err8 += (triangulate_dlt(obs) - p).norm();
  }
  EXPECT_LT(err8, err2);
}

TEST(Dlt, Errors) {
  std::mt19937_64 rng(33);
  const Camera a = random_camera(rng);
  const std::vector<Observation> one{{a, {3, 4}}};
  EXPECT_EQ(code_of([&] { triangulate_dlt(one); }), ErrorCode::kInsufficientViews);
  const std::vector<Observation> same{{a, {3, 4}}, {a, {3, 4}}};
  EXPECT_EQ(code_of([&] { triangulate_dlt(same); }), ErrorCode::kDegenerateConfiguration);
}

TEST(Ransac, ExcludesPlantedOutliers) {
  std::mt19937_64 rng(41);
  const Eigen::Vector3d p = random_point(rng);
  std::vector<Observation> obs;
  for (int k = 0; k < 10; ++k) {
    const Camera cam = random_camera(rng);
    Eigen::Vector2d x = project(cam, p);
    if (k == 2 || k == 5 || k == 7) x += Eigen::Vector2d(50.0, 0.0);
    obs.push_back({cam, x});
  }
  const RansacResult r = triangulate_ransac(obs, 2.0, 500, 7);
  EXPECT_LT((r.point - p).norm(), 1e-6);
  EXPECT_EQ(r.inlier_count, 7);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(r.inliers[k], !(k == 2 || k == 5 || k == 7));
}

TEST(Ransac, NoiselessAllInliersAndDeterministic) {
  std::mt19937_64 rng(42);
  const Eigen::Vector3d p = random_point(rng);
  std::vector<Observation> obs;
  for (int k = 0; k < 6; ++k) {
    const Camera cam = random_camera(rng);
    obs.push_back({cam, project(cam, p)});
  }
  const RansacResult a = triangulate_ransac(obs, 1.0, 100, 9);
  const RansacResult b = triangulate_ransac(obs, 1.0, 100, 9);
  EXPECT_EQ(a.inlier_count, 6);
  EXPECT_EQ(a.point, b.point);
  EXPECT_EQ(a.inliers, b.inliers);
}

TEST(Ransac, NoConsensus) {
  std::mt19937_64 rng(43);
  std::vector<Observation> obs;
  for (int k = 0; k < 4; ++k) {
    const Camera cam = random_camera(rng);
    obs.push_back({cam, project(cam, random_point(rng, 2.0)) + Eigen::Vector2d(9.0 * k, 0)});
  }
  EXPECT_EQ(code_of([&] { triangulate_ransac(obs, 1e-3, 50, 1); }), ErrorCode::kNoConsensus);
}
