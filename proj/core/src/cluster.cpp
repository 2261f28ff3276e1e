#include "lidarlabel/cluster.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "lidarlabel/error.hpp"

namespace lidarlabel {

void validate(const ClusterParams& params) {
  if (!(params.epsilon > 0.0)) fail(ErrorCode::kParameter, "epsilon must be positive");
  if (!(params.prune_radius > 0.0)) fail(ErrorCode::kParameter, "prune radius must be positive");
  if (!(params.downsample_cell > 0.0)) {
    fail(ErrorCode::kParameter, "downsample cell must be positive");
  }
}

Cluster expand_cluster(const PointCloud& cloud, std::span<const std::size_t> nonground,
                       std::size_t seed, const ClusterParams& params) {
  validate(params);
  if (seed >= cloud.size()) {
    fail(ErrorCode::kLookup, "seed index " + std::to_string(seed) + " out of range");
  }
  if (!std::binary_search(nonground.begin(), nonground.end(), seed)) {
    fail(ErrorCode::kSeedOnGround, "seed point is classified as ground");
  }

  Cluster cluster;
  cluster.seed = seed;
  cluster.region = prune_around(cloud, nonground, cloud[seed], params.prune_radius);

  IndexSet working;
  if (cluster.region.size() > params.max_points_before_downsample) {
    working = voxel_downsample(cloud, cluster.region, params.downsample_cell);
    const auto at = std::lower_bound(working.begin(), working.end(), seed);
    if (at == working.end() || *at != seed) working.insert(at, seed);
    cluster.downsampled = true;
  } else {
    working = cluster.region;
  }

  const VoxelIndex index(cloud, working, params.epsilon);
  std::vector<bool> seen(cloud.size(), false);
  std::deque<std::size_t> frontier{seed};
  seen[seed] = true;
  cluster.members.push_back(seed);
  while (!frontier.empty()) {
    const std::size_t current = frontier.front();
    frontier.pop_front();
    index.for_each_within(cloud[current], params.epsilon, [&](std::size_t n) {
      if (seen[n]) return;
      seen[n] = true;
      cluster.members.push_back(n);
      frontier.push_back(n);
    });
  }
  std::sort(cluster.members.begin(), cluster.members.end());
  return cluster;
}

IndexSet restore_full_resolution(const PointCloud& cloud, const Cluster& cluster,
                                 double epsilon) {
  if (!cluster.downsampled) return cluster.members;
  if (!(epsilon > 0.0)) fail(ErrorCode::kParameter, "epsilon must be positive");
  const VoxelIndex index(cloud, cluster.region, epsilon);
  std::vector<bool> taken(cloud.size(), false);
  IndexSet out;
  for (std::size_t m : cluster.members) {
    index.for_each_within(cloud[m], epsilon, [&](std::size_t n) {
      if (!taken[n]) {
        taken[n] = true;
        out.push_back(n);
      }
    });
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lidarlabel
