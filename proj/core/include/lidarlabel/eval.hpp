#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lidarlabel/boxfit.hpp"

namespace lidarlabel {

// Area of a simple polygon (shoelace); positive for counter-clockwise order.
double polygon_area(std::span<const Eigen::Vector2d> polygon);

// Clips `subject` against the convex counter-clockwise polygon `clip`.
std::vector<Eigen::Vector2d> clip_convex(std::span<const Eigen::Vector2d> subject,
                                         std::span<const Eigen::Vector2d> clip);

// Top-view IoU in [0, 1]. Symmetric, and exactly 1 for identical boxes.
double rotated_iou(const TopViewBox& a, const TopViewBox& b);

struct LabeledBox {
  std::uint64_t id = 0;
  TopViewBox box;
};

struct MatchPair {
  std::uint64_t annotation_id = 0;
  std::uint64_t ground_truth_id = 0;
  double iou = 0.0;
  bool operator==(const MatchPair&) const = default;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // in matching order
  std::vector<std::uint64_t> unmatched_annotations;
  std::vector<std::uint64_t> unmatched_ground_truths;
};

// Greedy one-to-one matching over pairs with IoU strictly above the threshold,
// highest IoU first; ties go to the lower annotation id, then lower GT id.
MatchResult match_instances(std::span<const LabeledBox> annotations,
                            std::span<const LabeledBox> ground_truths,
                            double iou_threshold = 0.5);

struct PrecisionRecall {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::optional<double> precision;  // absent with no annotations
  std::optional<double> recall;     // absent with no ground truths
  std::optional<double> mean_iou;   // absent with no matches
};

PrecisionRecall precision_recall(std::span<const MatchResult> frames);

}  // namespace lidarlabel
