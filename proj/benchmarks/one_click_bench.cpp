// Interactive-path timings on synthetic 100k-point frames.

#include <benchmark/benchmark.h>

#include "lidarlabel/boxfit.hpp"
#include "lidarlabel/cluster.hpp"
#include "lidarlabel/eval.hpp"
#include "lidarlabel/ground.hpp"
#include "lidarlabel/track.hpp"
#include "synthetic.hpp"

namespace {

using namespace lidarlabel;

struct Frame {
  PointCloud cloud;
  TopViewBox car;
  std::size_t seed = 0;
};

// Street scene: ground disk, a car, and scattered clutter, n points total.
Frame make_frame(std::size_t n) {
  testing::Rng rng(2024);
  Frame f;
  f.car.cx = 12.0;
  f.car.cy = -3.0;
  f.car.width = 1.8;
  f.car.length = 4.5;
  f.car.yaw = 0.4;
  const std::size_t car_points = n / 20;
  const IndexSet car = testing::add_car(f.cloud, f.car, 1.5, car_points, rng);
  f.seed = car.front();
  for (int o = 0; o < 20; ++o) {
    TopViewBox b = testing::random_rectangle(rng, 35.0);
    if (std::hypot(b.cx - f.car.cx, b.cy - f.car.cy) < 6.0) continue;
    testing::add_car(f.cloud, b, 2.0, n / 100, rng);
  }
  testing::add_flat_ground(f.cloud, n - f.cloud.size(), 40.0, rng);
  return f;
}

void BM_GroundRemoval(benchmark::State& state) {
  const Frame f = make_frame(static_cast<std::size_t>(state.range(0)));
  GroundParams p;
  p.distance_threshold = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(remove_ground(f.cloud, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GroundRemoval)->Arg(100'000)->Unit(benchmark::kMillisecond);

// Click -> box: cluster expansion, full-resolution restore and the heading search.
void BM_OneClick(benchmark::State& state) {
  const Frame f = make_frame(static_cast<std::size_t>(state.range(0)));
  GroundParams gp;
  gp.distance_threshold = 0.1;
  const GroundResult g = remove_ground(f.cloud, gp);
  const ClusterParams cp;
  for (auto _ : state) {
    const Cluster c = expand_cluster(f.cloud, g.nonground, f.seed, cp);
    const IndexSet members = restore_full_resolution(f.cloud, c, cp.epsilon);
    benchmark::DoNotOptimize(fit_cluster_box(f.cloud, members));
  }
}
BENCHMARK(BM_OneClick)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_FitRectangle(benchmark::State& state) {
  testing::Rng rng(7);
  const TopViewBox b = testing::random_rectangle(rng);
  const auto pts = testing::sample_l_shape(b, static_cast<std::size_t>(state.range(0)), 0.03, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_rectangle(pts));
}
BENCHMARK(BM_FitRectangle)->Arg(200)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_RotatedIou(benchmark::State& state) {
  testing::Rng rng(8);
  const TopViewBox a = testing::random_rectangle(rng, 1.0);
  const TopViewBox b = testing::random_rectangle(rng, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(rotated_iou(a, b));
}
BENCHMARK(BM_RotatedIou);

void BM_KalmanStep(benchmark::State& state) {
  KalmanParams p;
  TrackState ts;
  for (auto _ : state) {
    ts = update(predict(ts, p), ts.position() + Eigen::Vector2d(0.01, 0.0), p);
    benchmark::DoNotOptimize(ts);
  }
}
BENCHMARK(BM_KalmanStep);

}  // namespace

BENCHMARK_MAIN();
