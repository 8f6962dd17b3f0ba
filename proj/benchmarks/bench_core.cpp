#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mvkp/epipolar_transfer.hpp"
#include "mvkp/geometry.hpp"
#include "mvkp/heatmap.hpp"
#include "mvkp/model.hpp"
#include "mvkp/supervise.hpp"
#include "mvkp/synth.hpp"
#include "mvkp/temporal.hpp"

using namespace mvkp;

namespace {

Heatmap random_heatmap(std::mt19937_64& rng, int channels) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Heatmap p(kGridSize, kGridSize, channels);
  for (double& v : p.values()) v = u(rng);
  for (int c = 0; c < channels; ++c) {
    auto plane = p.plane(c);
    normalize_in_place(plane);
  }
  return p;
}

const Scene& scene() {
  static const Scene s = generate(SynthConfig{}, 0);
  return s;
}

void BM_TransferPlan(benchmark::State& state) {
  const EpipolarPencil pencil(scene().cameras[0], scene().cameras[1]);
  for (auto _ : state) benchmark::DoNotOptimize(TransferPlan(pencil, PencilView::kI));
}
BENCHMARK(BM_TransferPlan);

void BM_Transfer(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const EpipolarPencil pencil(scene().cameras[0], scene().cameras[1]);
  const TransferPlan plan(pencil, PencilView::kI);
  const Heatmap p = random_heatmap(rng, 1);
  for (auto _ : state) benchmark::DoNotOptimize(transfer(p.plane_view(0), plan));
}
BENCHMARK(BM_Transfer);

void BM_CrossViewLoss(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const EpipolarPencil pencil(scene().cameras[0], scene().cameras[1]);
  const TransferPlan plan_i(pencil, PencilView::kI), plan_j(pencil, PencilView::kJ);
  const Heatmap pi = random_heatmap(rng, 1), pj = random_heatmap(rng, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cross_view_loss(pi.plane_view(0), pj.plane_view(0), plan_i, plan_j));
  }
}
BENCHMARK(BM_CrossViewLoss);

void BM_Warp(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Heatmap p = random_heatmap(rng, 1);
  const FlowField flow = ground_truth_flow(scene(), 0, 10, 11);
  for (auto _ : state) benchmark::DoNotOptimize(warp(p.plane_view(0), flow));
}
BENCHMARK(BM_Warp);

void BM_TemporalLoss(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const Heatmap p1 = random_heatmap(rng, 1), p2 = random_heatmap(rng, 1);
  const auto op = std::make_shared<const BilinearWarp>(ground_truth_flow(scene(), 0, 10, 11));
  for (auto _ : state) {
    benchmark::DoNotOptimize(temporal_loss(p1.plane_view(0), p2.plane_view(0), op));
  }
}
BENCHMARK(BM_TemporalLoss);

void BM_Forward(benchmark::State& state) {
  const PredictorWeights w = PredictorWeights::random(scene().channel_count(), 5);
  const Image image = render(scene(), 0, 0);
  for (auto _ : state) benchmark::DoNotOptimize(forward(w, image));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMicrosecond);

void BM_ForwardBackward(benchmark::State& state) {
  const PredictorWeights w = PredictorWeights::random(scene().channel_count(), 6);
  const Image image = render(scene(), 0, 0);
  const Annotation annotation = ground_truth(scene(), 0, 0).annotation;
  for (auto _ : state) {
    const ForwardResult f = forward(w, image);
    const LabelLossResult l = label_loss(f.heatmap, f.visibility, annotation, 1.0);
    benchmark::DoNotOptimize(backward(w, f.cache, l.grad_p, l.grad_v));
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMicrosecond);

void BM_TriangulateRansac(benchmark::State& state) {
  const Eigen::Vector3d point(0.2, -0.1, 0.3);
  std::vector<Observation> obs;
  for (const Camera& cam : scene().cameras) obs.push_back({cam, project(cam, point)});
  obs[2].pixel.x() += 9.0;
  for (auto _ : state) benchmark::DoNotOptimize(triangulate_ransac(obs, 2.0, 500, 7));
}
BENCHMARK(BM_TriangulateRansac)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
