// Command-line front end: serve, batch pre-labeling, evaluation and one-shot
// geometry runs for scripting.

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lidarlabel/boxfit.hpp"
#include "lidarlabel/cluster.hpp"
#include "lidarlabel/error.hpp"
#include "lidarlabel/eval.hpp"
#include "lidarlabel/fusion.hpp"
#include "lidarlabel/ground.hpp"
#include "lidarlabel/json_io.hpp"
#include "lidarlabel/sequence.hpp"
#include "lidarlabel/service/annotation_service.hpp"
#include "lidarlabel/service/http_server.hpp"
#include "lidarlabel/session.hpp"

namespace fs = std::filesystem;
using namespace lidarlabel;

namespace {

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
  out << text;
}

PointCloud load_cloud(const fs::path& p) {
  return p.extension() == ".csv" ? load_csv(p) : load_kitti_bin(p);
}

struct ParamFlags {
  GroundParams ground;
  ClusterParams cluster;
  FitParams fit;
  double theta_step_deg = rad_to_deg(FitParams{}.theta_step);

  void add(CLI::App* app) {
    app->add_option("--ground-thresh", ground.distance_threshold, "plane distance threshold (m)");
    app->add_option("--ground-seed-frac", ground.seed_fraction, "lowest-z seed fraction");
    app->add_option("--ground-iters", ground.max_iterations, "plane refit iterations");
    app->add_option("--ground-tile", ground.tile_size, "tile edge (m), 0 = one plane");
    app->add_option("--epsilon", cluster.epsilon, "cluster hop length (m)");
    app->add_option("--prune-radius", cluster.prune_radius, "horizontal search radius (m)");
    app->add_option("--downsample-cell", cluster.downsample_cell, "voxel size for big regions (m)");
    app->add_option("--theta-step", theta_step_deg, "heading grid step (deg)");
  }
  void finish() {
    fit.theta_step = deg_to_rad(theta_step_deg);
    validate(ground);
    validate(cluster);
    validate(fit);
  }
};

std::map<std::string, fs::path> label_files(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") {
      out[e.path().filename().string()] = e.path();
    }
  }
  return out;
}

std::vector<LabeledBox> read_boxes(const fs::path& p) {
  std::vector<LabeledBox> out;
  std::uint64_t id = 0;
  for (const TopViewBox& b : parse_labels(read_file(p))) out.push_back({id++, b});
  return out;
}

int run_serve(const std::string& config_path) {
  service::ServiceConfig config = service::load_config(config_path);
  service::AnnotationService svc(config);
  service::HttpServer server(svc);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << config.host << ":" << config.port << "\n";
  const bool ok = server.listen(config.host, config.port);
  g_server = nullptr;
  return ok ? 0 : 1;
}

int run_prelabel(const fs::path& seq_dir, const fs::path& out_dir) {
  const FrameSequence seq = load_sequence(seq_dir);
  fs::create_directories(out_dir);
  std::size_t total = 0;
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    const FrameDescriptor& d = seq.frames[k];
    if (!d.calibration || !d.mask) {
      std::cerr << "frame " << k << ": no calibration or mask, skipped\n";
      continue;
    }
    const PointCloud cloud = load_cloud(d.cloud);
    const CalibrationModel calib =
        load_calibration(*d.calibration, seq.image_width, seq.image_height);
    const SegMask mask = load_mask(*d.mask, class_map_path(*d.mask));
    const auto labels = transfer_labels(calib, cloud, mask);
    std::string csv = "index,class,instance\n";
    for (const PreLabel& pl : labels) {
      csv += std::to_string(pl.index) + "," + std::string(to_string(pl.label)) + "," +
             std::to_string(pl.instance) + "\n";
    }
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.csv", k);
    write_file(out_dir / name, csv);
    total += labels.size();
    std::cout << "frame " << k << ": " << labels.size() << " of " << cloud.size()
              << " points pre-labeled\n";
  }
  std::cout << total << " pre-labels written to " << out_dir.string() << "\n";
  return 0;
}

int run_eval(const fs::path& pred, const fs::path& gt, double thresh, bool json) {
  const auto pred_files = label_files(pred);
  const auto gt_files = label_files(gt);
  std::vector<MatchResult> results;
  Json frames = Json::array();
  for (const auto& [name, gt_path] : gt_files) {
    const auto gts = read_boxes(gt_path);
    const auto it = pred_files.find(name);
    const auto preds = it == pred_files.end() ? std::vector<LabeledBox>{} : read_boxes(it->second);
    MatchResult m = match_instances(preds, gts, thresh);
    frames.push_back(Json{{"frame", name},
                          {"tp", m.pairs.size()},
                          {"fp", m.unmatched_annotations.size()},
                          {"fn", m.unmatched_ground_truths.size()}});
    results.push_back(std::move(m));
  }
  for (const auto& [name, pred_path] : pred_files) {
    if (gt_files.contains(name)) continue;
    MatchResult m = match_instances(read_boxes(pred_path), {}, thresh);
    frames.push_back(Json{{"frame", name}, {"tp", 0}, {"fp", m.unmatched_annotations.size()},
                          {"fn", 0}});
    results.push_back(std::move(m));
  }
  if (results.empty()) fail(ErrorCode::kLookup, "no label files to evaluate");
  const PrecisionRecall pr = precision_recall(results);
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  if (json) {
    std::cout << Json{{"iou_threshold", thresh},
                      {"true_positives", pr.true_positives},
                      {"false_positives", pr.false_positives},
                      {"false_negatives", pr.false_negatives},
                      {"precision", opt(pr.precision)},
                      {"recall", opt(pr.recall)},
                      {"mean_iou", opt(pr.mean_iou)},
                      {"frames", frames}}
                     .dump(2)
              << "\n";
  } else {
    auto show = [](const std::optional<double>& v) {
      return v ? std::to_string(*v) : std::string("n/a");
    };
    std::cout << "frames     " << results.size() << "\n"
              << "TP/FP/FN   " << pr.true_positives << "/" << pr.false_positives << "/"
              << pr.false_negatives << "\n"
              << "precision  " << show(pr.precision) << "\n"
              << "recall     " << show(pr.recall) << "\n"
              << "mean IoU   " << show(pr.mean_iou) << "\n";
  }
  return 0;
}

int run_ground(const fs::path& cloud_path, const ParamFlags& flags, const fs::path& out) {
  const PointCloud cloud = load_cloud(cloud_path);
  const GroundResult g = remove_ground(cloud, flags.ground);
  const std::size_t n_ground = cloud.size() - g.nonground.size();
  std::cout << Json{{"points", cloud.size()},
                    {"ground", n_ground},
                    {"nonground", g.nonground.size()},
                    {"iterations", g.iterations},
                    {"converged", g.converged},
                    {"normal", {g.plane.normal.x(), g.plane.normal.y(), g.plane.normal.z()}},
                    {"offset", g.plane.offset}}
                   .dump(2)
            << "\n";
  if (!out.empty()) {
    std::string csv = "index,ground\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      csv += std::to_string(i) + (g.is_ground[i] ? ",1\n" : ",0\n");
    }
    write_file(out, csv);
  }
  return 0;
}

int run_oneclick(const fs::path& cloud_path, const ParamFlags& flags,
                 std::optional<std::size_t> index, std::optional<double> x,
                 std::optional<double> y) {
  const PointCloud cloud = load_cloud(cloud_path);
  const GroundResult g = remove_ground(cloud, flags.ground);
  std::size_t seed = 0;
  if (index) {
    seed = *index;
  } else if (x && y) {
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i : g.nonground) {
      const double d = std::hypot(cloud[i].x - *x, cloud[i].y - *y);
      if (d <= 1.0 && d < best) {
        best = d;
        seed = i;
        found = true;
      }
    }
    if (!found) fail(ErrorCode::kNoSeed, "no object point within 1 m");
  } else {
    fail(ErrorCode::kParameter, "give --index or --x and --y");
  }
  if (seed >= cloud.size()) fail(ErrorCode::kLookup, "seed index out of range");
  const Cluster c = expand_cluster(cloud, g.nonground, seed, flags.cluster);
  const IndexSet members = restore_full_resolution(cloud, c, flags.cluster.epsilon);
  const TopViewBox box = fit_cluster_box(cloud, members, flags.fit);
  std::cout << Json{{"seed", seed}, {"members", members.size()}, {"box", box}}.dump(2) << "\n";
  return 0;
}

int run_export(const fs::path& session_path, int frame, const fs::path& out) {
  const Session s = load_session(session_path);
  const std::string text = export_labels(s, frame);
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file(out, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR top-view box annotation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto* serve = app.add_subcommand("serve", "run the HTTP annotation service");
  serve->add_option("--config", config_path, "service config JSON")->required();

  std::string seq_dir, prelabel_out;
  auto* prelabel = app.add_subcommand("prelabel", "transfer image masks to points");
  prelabel->add_option("--seq", seq_dir, "sequence directory")->required();
  prelabel->add_option("--out", prelabel_out, "output directory (default <seq>/prelabels)");

  std::string pred_dir, gt_dir;
  double iou_thresh = 0.5;
  bool eval_json = false;
  auto* eval = app.add_subcommand("eval", "instance precision/recall against ground truth");
  eval->add_option("--pred", pred_dir, "directory of predicted label files")->required();
  eval->add_option("--gt", gt_dir, "directory of ground-truth label files")->required();
  eval->add_option("--iou-thresh", iou_thresh, "IoU above which a match counts");
  eval->add_flag("--json", eval_json, "machine-readable output");

  std::string cloud_path, ground_out;
  ParamFlags ground_flags;
  auto* ground = app.add_subcommand("ground", "ground removal on one cloud");
  ground->add_option("--cloud", cloud_path, ".bin or .csv cloud")->required();
  ground->add_option("--out", ground_out, "per-point ground CSV");
  ground_flags.add(ground);

  ParamFlags click_flags;
  std::optional<std::size_t> click_index;
  std::optional<double> click_x, click_y;
  auto* oneclick = app.add_subcommand("oneclick", "cluster and fit a box from one seed");
  oneclick->add_option("--cloud", cloud_path, ".bin or .csv cloud")->required();
  oneclick->add_option("--index", click_index, "seed point index");
  oneclick->add_option("--x", click_x, "click x (m)");
  oneclick->add_option("--y", click_y, "click y (m)");
  click_flags.add(oneclick);

  std::string session_path, export_out;
  int export_frame = 0;
  auto* exp = app.add_subcommand("export", "write one frame's label file from a session");
  exp->add_option("--session", session_path, "session JSON")->required();
  exp->add_option("--frame", export_frame, "frame index")->required();
  exp->add_option("--out", export_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return run_serve(config_path);
    if (*prelabel) {
      const fs::path out = prelabel_out.empty() ? fs::path(seq_dir) / "prelabels" : fs::path(prelabel_out);
      return run_prelabel(seq_dir, out);
    }
    if (*eval) return run_eval(pred_dir, gt_dir, iou_thresh, eval_json);
    if (*ground) {
      ground_flags.finish();
      return run_ground(cloud_path, ground_flags, ground_out);
    }
    if (*oneclick) {
      click_flags.finish();
      return run_oneclick(cloud_path, click_flags, click_index, click_x, click_y);
    }
    if (*exp) return run_export(session_path, export_frame, export_out);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
