#pragma once

#include <cstddef>
#include <span>

#include "lidarlabel/cloud.hpp"

namespace lidarlabel {

struct ClusterParams {
  double epsilon = 0.5;           // meters, neighbor hop length
  double prune_radius = 15.0;     // meters, horizontal
  double downsample_cell = 0.1;   // meters
  std::size_t max_points_before_downsample = 20000;

  bool operator==(const ClusterParams&) const = default;
};

void validate(const ClusterParams& params);

struct Cluster {
  std::size_t seed = 0;
  IndexSet members;
  // Non-ground indices inside the prune radius, before any downsampling.
  IndexSet region;
  bool downsampled = false;
};

// BFS over epsilon-neighborhoods starting at `seed`, restricted to
// nonground ∩ prune_around(seed), downsampled when that set exceeds the cap.
// `nonground` must be sorted. Throws kSeedOnGround when seed is not in it.
Cluster expand_cluster(const PointCloud& cloud, std::span<const std::size_t> nonground,
                       std::size_t seed, const ClusterParams& params = {});

// Region indices within epsilon of any member. Identity when the cluster was
// computed without downsampling.
IndexSet restore_full_resolution(const PointCloud& cloud, const Cluster& cluster,
                                 double epsilon);

}  // namespace lidarlabel
