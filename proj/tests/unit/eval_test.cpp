#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "lidarlabel/eval.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace lidarlabel {
namespace {

using testing::Rng;
using testing::uniform;

TopViewBox square(double cx, double cy, double yaw = 0.0, double side = 1.0) {
  TopViewBox b;
  b.cx = cx;
  b.cy = cy;
  b.width = side;
  b.length = side;
  b.yaw = yaw;
  return b;
}

TEST(PolygonArea, Shoelace) {
  const std::vector<Eigen::Vector2d> tri{{0, 0}, {2, 0}, {0, 3}};
  EXPECT_DOUBLE_EQ(polygon_area(tri), 3.0);
  const std::vector<Eigen::Vector2d> cw{{0, 0}, {0, 3}, {2, 0}};
  EXPECT_DOUBLE_EQ(polygon_area(cw), -3.0);
}

TEST(RotatedIou, Identical) {
  TopViewBox b = square(3, 4, 0.7);
  b.length = 4.2;
  EXPECT_EQ(rotated_iou(b, b), 1.0);
}

TEST(RotatedIou, Disjoint) { EXPECT_EQ(rotated_iou(square(0, 0), square(5, 0)), 0.0); }

TEST(RotatedIou, OffsetUnitSquaresIsOneThird) {
  EXPECT_NEAR(rotated_iou(square(0, 0), square(0.5, 0)), 1.0 / 3.0, 1e-12);
}

TEST(RotatedIou, DiamondMatchesMonteCarlo) {
  const TopViewBox a = square(0, 0);
  const TopViewBox b = square(0, 0, kPi / 4.0);
  // Exact: intersection is a regular octagon of area 2 (sqrt 2 - 1).
  const double octagon = 2.0 * (std::sqrt(2.0) - 1.0);
  EXPECT_NEAR(rotated_iou(a, b), octagon / (2.0 - octagon), 1e-12);
  EXPECT_NEAR(rotated_iou(a, b), testing::monte_carlo_iou(a, b, 10'000'000, 81), 1e-3);
}

TEST(RotatedIou, SymmetricAndBounded) {
  Rng rng(82);
  for (int i = 0; i < 500; ++i) {
    const TopViewBox a = testing::random_rectangle(rng, 2.0);
    const TopViewBox b = testing::random_rectangle(rng, 2.0);
    const double ab = rotated_iou(a, b);
    EXPECT_EQ(ab, rotated_iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(RotatedIou, ContainedBox) {
  TopViewBox outer = square(0, 0, 0.2, 4.0);
  TopViewBox inner = square(0.3, -0.2, 1.1, 1.0);
  EXPECT_NEAR(rotated_iou(outer, inner), 1.0 / 16.0, 1e-12);
}

TEST(Match, ExactPair) {
  const std::vector<LabeledBox> ann{{1, square(0, 0)}}, gt{{10, square(0, 0)}};
  const MatchResult r = match_instances(ann, gt);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0], (MatchPair{1, 10, 1.0}));
}

TEST(Match, BelowThresholdUnmatched) {
  // Offset 0.4 / 1.6 ... choose offset d with (1-d)/(1+d) = 0.4.
  const double d = 0.6 / 1.4;
  const std::vector<LabeledBox> ann{{1, square(d, 0)}}, gt{{2, square(0, 0)}};
  ASSERT_NEAR(rotated_iou(ann[0].box, gt[0].box), 0.4, 1e-12);
  const MatchResult r = match_instances(ann, gt);
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.unmatched_annotations, (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(r.unmatched_ground_truths, (std::vector<std::uint64_t>{2}));
}

// Ground truths laid out on a grid so they never overlap.
std::vector<LabeledBox> grid_truths(Rng& rng, std::size_t n) {
  std::vector<LabeledBox> gt;
  for (std::size_t k = 0; k < n; ++k) {
    TopViewBox b = testing::random_rectangle(rng, 0.0);
    b.cx = 12.0 * static_cast<double>(k % 3);
    b.cy = 12.0 * static_cast<double>(k / 3);
    gt.push_back({100 + k, b});
  }
  return gt;
}

std::vector<LabeledBox> jittered(Rng& rng, const std::vector<LabeledBox>& gt, std::size_t n) {
  std::vector<LabeledBox> ann;
  for (std::size_t k = 0; k < n; ++k) {
    TopViewBox b = gt[std::uniform_int_distribution<std::size_t>(0, gt.size() - 1)(rng)].box;
    b.cx += uniform(rng, -1.0, 1.0);
    b.cy += uniform(rng, -1.0, 1.0);
    b.yaw = canonical_yaw(b.yaw + uniform(rng, -0.3, 0.3));
    ann.push_back({k + 1, b});
  }
  return ann;
}

TEST(Match, GreedyEqualsExhaustiveOnSmallInstances) {
  Rng rng(83);
  for (int trial = 0; trial < 200; ++trial) {
    const auto gt = grid_truths(rng, 5);
    const auto ann = jittered(rng, gt, 5);
    std::vector<std::vector<double>> iou(5, std::vector<double>(5));
    for (std::size_t a = 0; a < 5; ++a) {
      for (std::size_t g = 0; g < 5; ++g) iou[a][g] = rotated_iou(ann[a].box, gt[g].box);
    }
    const auto best = testing::exhaustive_matching(iou, 0.5);
    const MatchResult r = match_instances(ann, gt);
    double total = 0;
    for (const MatchPair& p : r.pairs) total += p.iou;
    EXPECT_EQ(r.pairs.size(), best.count) << trial;
    EXPECT_NEAR(total, best.total_iou, 1e-12) << trial;
  }
}

TEST(PrecisionRecall, ThreeAnnotationsFourTruths) {
  MatchResult r;
  r.pairs = {{1, 10, 0.9}, {2, 11, 0.7}};
  r.unmatched_annotations = {3};
  r.unmatched_ground_truths = {12, 13};
  const PrecisionRecall pr = precision_recall(std::vector<MatchResult>{r});
  EXPECT_EQ(pr.precision, 2.0 / 3.0);
  EXPECT_EQ(pr.recall, 0.5);
  EXPECT_EQ(pr.mean_iou, (0.9 + 0.7) / 2.0);
}

TEST(PrecisionRecall, Perfect) {
  const std::vector<LabeledBox> boxes{{1, square(0, 0)}, {2, square(5, 5)}};
  const std::vector<MatchResult> frames{match_instances(boxes, boxes)};
  const PrecisionRecall pr = precision_recall(frames);
  EXPECT_EQ(pr.precision, 1.0);
  EXPECT_EQ(pr.recall, 1.0);
  EXPECT_EQ(pr.mean_iou, 1.0);
}

TEST(PrecisionRecall, AbsentWhenUndefined) {
  const std::vector<LabeledBox> none, one{{1, square(0, 0)}};
  PrecisionRecall pr = precision_recall(std::vector<MatchResult>{match_instances(none, one)});
  EXPECT_FALSE(pr.precision);
  EXPECT_EQ(pr.recall, 0.0);
  EXPECT_FALSE(pr.mean_iou);
  pr = precision_recall(std::vector<MatchResult>{match_instances(one, none)});
  EXPECT_EQ(pr.precision, 0.0);
  EXPECT_FALSE(pr.recall);
}

TEST(PrecisionRecall, FiftyInstancesMatchScriptedCount) {
  Rng rng(84);
  std::vector<MatchResult> frames;
  std::size_t tp = 0, n_ann = 0, n_gt = 0;
  double iou_sum = 0;
  for (int f = 0; f < 10; ++f) {
    const auto gt = grid_truths(rng, 5);
    const auto ann = jittered(rng, gt, 5);
    n_ann += ann.size();
    n_gt += gt.size();
    // Independent count: with non-overlapping truths each annotation can clear
    // the threshold against at most one truth; take the best one per truth.
    std::vector<double> best(gt.size(), 0.0);
    for (const auto& a : ann) {
      for (std::size_t g = 0; g < gt.size(); ++g) {
        const double v = rotated_iou(a.box, gt[g].box);
        if (v > 0.5) best[g] = std::max(best[g], v);
      }
    }
    for (double v : best) {
      if (v > 0.0) {
        ++tp;
        iou_sum += v;
      }
    }
    frames.push_back(match_instances(ann, gt));
  }
  const PrecisionRecall pr = precision_recall(frames);
  EXPECT_EQ(pr.true_positives, tp);
  EXPECT_EQ(pr.false_positives, n_ann - tp);
  EXPECT_EQ(pr.false_negatives, n_gt - tp);
  EXPECT_EQ(pr.precision, static_cast<double>(tp) / static_cast<double>(n_ann));
  EXPECT_EQ(pr.recall, static_cast<double>(tp) / static_cast<double>(n_gt));
  ASSERT_TRUE(pr.mean_iou);
  EXPECT_NEAR(*pr.mean_iou, iou_sum / static_cast<double>(tp), 1e-12);
}

}  // namespace
}  // namespace lidarlabel
