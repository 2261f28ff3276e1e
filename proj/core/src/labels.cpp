#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <system_error>

#include "lidarlabel/error.hpp"
#include "lidarlabel/session.hpp"

namespace lidarlabel {
namespace {

void append_fixed(std::string& out, double v) {
  // -0.000000 and 0.000000 must not depend on the sign of a tiny value.
  if (std::fabs(v) < 5e-7) v = 0.0;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
  if (res.ec != std::errc()) fail(ErrorCode::kNumerical, "cannot format label value");
  out.append(buf, res.ptr);
}

std::string_view next_token(std::string_view& line) {
  const auto begin = line.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) {
    line = {};
    return {};
  }
  line.remove_prefix(begin);
  const auto end = line.find_first_of(" \t\r");
  const std::string_view tok = line.substr(0, end);
  line.remove_prefix(end == std::string_view::npos ? line.size() : end);
  return tok;
}

double parse_number(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    fail(ErrorCode::kParse, "label line " + std::to_string(line_no) + ": bad number '" +
                                std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::string format_labels(std::span<const TopViewBox> boxes) {
  std::string out;
  for (const TopViewBox& b : boxes) {
    out += to_string(b.label);
    const ZExtent z = b.z.value_or(ZExtent{});
    for (double v : {b.cx, b.cy, z.min, z.max, b.width, b.length, b.yaw}) {
      out += ' ';
      append_fixed(out, v);
    }
    out += '\n';
  }
  return out;
}

std::vector<TopViewBox> parse_labels(std::string_view text) {
  std::vector<TopViewBox> boxes;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;
    const std::string_view name = next_token(line);
    if (name.empty()) continue;
    double v[7];
    for (double& x : v) {
      const std::string_view tok = next_token(line);
      if (tok.empty()) {
        fail(ErrorCode::kParse, "label line " + std::to_string(line_no) + ": expected 8 fields");
      }
      x = parse_number(tok, line_no);
    }
    if (!next_token(line).empty()) {
      fail(ErrorCode::kParse, "label line " + std::to_string(line_no) + ": trailing fields");
    }
    TopViewBox b;
    b.label = parse_object_class(name);
    b.cx = v[0];
    b.cy = v[1];
    b.z = ZExtent{v[2], v[3]};
    b.width = v[4];
    b.length = v[5];
    b.yaw = v[6];
    boxes.push_back(b);
  }
  return boxes;
}

std::string export_labels(const Session& session, int frame) {
  if (frame < 0 || frame >= session.frame_count()) {
    fail(ErrorCode::kLookup, "frame " + std::to_string(frame) + " is not in the sequence");
  }
  std::vector<TopViewBox> boxes;
  for (const AnnotationRecord& rec : session.frame_annotations(frame)) boxes.push_back(rec.box);
  return format_labels(boxes);
}

PointwiseLabels derive_pointwise_labels(const PointCloud& cloud,
                                        std::span<const AnnotationRecord> annotations) {
  PointwiseLabels out;
  out.labels.assign(cloud.size(), std::nullopt);
  std::vector<std::vector<std::size_t>> hits(cloud.size());
  for (std::size_t a = 0; a < annotations.size(); ++a) {
    for (std::size_t i : points_in_box(cloud, annotations[a].box)) hits[i].push_back(a);
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (hits[i].empty()) continue;
    if (hits[i].size() == 1) {
      out.labels[i] = annotations[hits[i].front()].box.label;
      continue;
    }
    const Point3& p = cloud[i];
    LabelConflict conflict;
    conflict.point = i;
    double best = std::numeric_limits<double>::infinity();
    const AnnotationRecord* chosen = nullptr;
    for (std::size_t a : hits[i]) {
      const AnnotationRecord& rec = annotations[a];
      conflict.annotation_ids.push_back(rec.id);
      const double d = std::hypot(p.x - rec.box.cx, p.y - rec.box.cy);
      if (d < best || (d == best && rec.id < chosen->id)) {
        best = d;
        chosen = &rec;
      }
    }
    std::sort(conflict.annotation_ids.begin(), conflict.annotation_ids.end());
    conflict.chosen = chosen->id;
    out.labels[i] = chosen->box.label;
    out.conflicts.push_back(std::move(conflict));
  }
  return out;
}

std::string format_pointwise_csv(const PointwiseLabels& labels) {
  std::string out = "index,class\n";
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += labels.labels[i] ? to_string(*labels.labels[i]) : std::string_view("background");
    out += '\n';
  }
  return out;
}

}  // namespace lidarlabel
