#include "lidarlabel/eval.hpp"

#include <algorithm>
#include <tuple>

namespace lidarlabel {
namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

auto geometry_key(const TopViewBox& b) {
  return std::make_tuple(b.cx, b.cy, b.width, b.length, b.yaw);
}

}  // namespace

double polygon_area(std::span<const Eigen::Vector2d> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) twice += cross(polygon[i], polygon[(i + 1) % n]);
  return 0.5 * twice;
}

std::vector<Eigen::Vector2d> clip_convex(std::span<const Eigen::Vector2d> subject,
                                         std::span<const Eigen::Vector2d> clip) {
  std::vector<Eigen::Vector2d> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Eigen::Vector2d& p = clip[e];
    const Eigen::Vector2d edge = clip[(e + 1) % clip.size()] - p;
    std::vector<Eigen::Vector2d> in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Eigen::Vector2d& cur = in[i];
      const Eigen::Vector2d& nxt = in[(i + 1) % in.size()];
      const double sc = cross(edge, cur - p);
      const double sn = cross(edge, nxt - p);
      if (sc >= 0.0) out.push_back(cur);
      // Strict sign change: boundary contact adds no vertex.
      if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
        const double t = sc / (sc - sn);
        out.push_back(cur + t * (nxt - cur));
      }
    }
  }
  return out;
}

double rotated_iou(const TopViewBox& a, const TopViewBox& b) {
  if (geometry_key(a) == geometry_key(b)) return 1.0;
  // Fixed argument order keeps the floating-point result symmetric.
  const bool swap = geometry_key(b) < geometry_key(a);
  const TopViewBox& s = swap ? b : a;
  const TopViewBox& c = swap ? a : b;
  const auto sc = s.corners();
  const auto cc = c.corners();
  const auto poly = clip_convex(sc, cc);
  const double inter = std::max(0.0, polygon_area(poly));
  const double uni = s.area() + c.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

MatchResult match_instances(std::span<const LabeledBox> annotations,
                            std::span<const LabeledBox> ground_truths, double iou_threshold) {
  struct Candidate {
    double iou;
    std::size_t a;
    std::size_t g;
  };
  std::vector<Candidate> candidates;
  for (std::size_t a = 0; a < annotations.size(); ++a) {
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      const double iou = rotated_iou(annotations[a].box, ground_truths[g].box);
      if (iou > iou_threshold) candidates.push_back({iou, a, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& x, const Candidate& y) {
    if (x.iou != y.iou) return x.iou > y.iou;
    const auto xa = annotations[x.a].id, ya = annotations[y.a].id;
    if (xa != ya) return xa < ya;
    return ground_truths[x.g].id < ground_truths[y.g].id;
  });

  MatchResult result;
  std::vector<bool> a_used(annotations.size(), false);
  std::vector<bool> g_used(ground_truths.size(), false);
  for (const Candidate& c : candidates) {
    if (a_used[c.a] || g_used[c.g]) continue;
    a_used[c.a] = true;
    g_used[c.g] = true;
    result.pairs.push_back({annotations[c.a].id, ground_truths[c.g].id, c.iou});
  }
  for (std::size_t a = 0; a < annotations.size(); ++a) {
    if (!a_used[a]) result.unmatched_annotations.push_back(annotations[a].id);
  }
  for (std::size_t g = 0; g < ground_truths.size(); ++g) {
    if (!g_used[g]) result.unmatched_ground_truths.push_back(ground_truths[g].id);
  }
  return result;
}

PrecisionRecall precision_recall(std::span<const MatchResult> frames) {
  PrecisionRecall pr;
  double iou_sum = 0.0;
  for (const MatchResult& m : frames) {
    pr.true_positives += m.pairs.size();
    pr.false_positives += m.unmatched_annotations.size();
    pr.false_negatives += m.unmatched_ground_truths.size();
    for (const MatchPair& p : m.pairs) iou_sum += p.iou;
  }
  const std::size_t tp = pr.true_positives;
  if (tp + pr.false_positives > 0) {
    pr.precision = static_cast<double>(tp) / static_cast<double>(tp + pr.false_positives);
  }
  if (tp + pr.false_negatives > 0) {
    pr.recall = static_cast<double>(tp) / static_cast<double>(tp + pr.false_negatives);
  }
  if (tp > 0) pr.mean_iou = iou_sum / static_cast<double>(tp);
  return pr;
}

}  // namespace lidarlabel
