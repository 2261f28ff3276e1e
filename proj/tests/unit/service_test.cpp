#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "lidarlabel/service/annotation_service.hpp"
#include "lidarlabel/service/config.hpp"
#include "lidarlabel/service/http_server.hpp"
#include "synthetic.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a `_res` macro.
#include <httplib.h>

namespace lidarlabel::service {
namespace {

namespace fs = std::filesystem;
using lidarlabel::testing::Rng;

constexpr double kSpeed = 0.5;  // meters per frame along x

TopViewBox car_at_frame(int k) {
  TopViewBox b;
  b.cx = 10.0 + kSpeed * k;
  b.cy = 3.0;
  b.width = 1.8;
  b.length = 4.5;
  b.yaw = deg_to_rad(10.0);
  b.label = ObjectClass::kCar;
  return b;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("lidarlabel_service_" + std::to_string(std::random_device{}()));
    const fs::path seq = root_ / "drive";
    fs::create_directories(seq / "velodyne");
    for (int k = 0; k < 4; ++k) {
      Rng rng(100 + static_cast<std::uint64_t>(k));
      PointCloud c;
      lidarlabel::testing::add_flat_ground(c, 20000, 30.0, rng, 0.01);
      lidarlabel::testing::add_car(c, car_at_frame(k), 1.5, 1500, rng, 0.01);
      char name[16];
      std::snprintf(name, sizeof(name), "%06d.bin", k);
      write_kitti_bin(seq / "velodyne" / name, c);
    }
    ServiceConfig config;
    config.sequences = {seq};
    config.session_dir = root_ / "sessions";
    config.params.display_cap = 5000;
    config.params.ground.distance_threshold = 0.1;
    service_ = std::make_unique<AnnotationService>(config, [this] { return now_ += 250; });
  }
  void TearDown() override { fs::remove_all(root_); }

  Json call(std::string_view method, const std::string& path, const Json& body = nullptr,
            int expected = 200) {
    const Response r = service_->handle(method, path, body.is_null() ? "" : body.dump());
    EXPECT_EQ(r.status, expected) << method << " " << path << ": " << r.body;
    if (r.content_type != "application/json") return Json(r.body);
    return Json::parse(r.body);
  }

  std::string new_session() {
    return call("POST", "/sessions", {{"sequence", "drive"}, {"id", "s1"}}, 201)["id"];
  }

  Json click_car(int frame) {
    const TopViewBox truth = car_at_frame(frame);
    return call("POST", "/sessions/s1/click",
                {{"frame", frame}, {"x", truth.cx + 2.25 * std::cos(truth.yaw)},
                 {"y", truth.cy + 2.25 * std::sin(truth.yaw)}});
  }

  fs::path root_;
  std::int64_t now_ = 1'700'000'000'000;
  std::unique_ptr<AnnotationService> service_;
};

TEST_F(ServiceTest, ListsSequencesAndClasses) {
  const Json seqs = call("GET", "/sequences");
  ASSERT_EQ(seqs["sequences"].size(), 1u);
  EXPECT_EQ(seqs["sequences"][0]["id"], "drive");
  EXPECT_EQ(seqs["sequences"][0]["frames"], 4);
  const Json classes = call("GET", "/classes");
  EXPECT_EQ(classes["classes"].size(), 6u);
}

TEST_F(ServiceTest, FramePayloadRespectsCapAndIndexMap) {
  const Json f = call("GET", "/sequences/drive/frames/0");
  EXPECT_LE(f["n_display"].get<std::size_t>(), 5000u);
  const auto data = service_->frame("drive", 0, service_->config().params.ground);
  const Json& pts = f["points"];
  const Json& map = f["index_map"];
  ASSERT_EQ(pts.size(), map.size());
  for (std::size_t d = 0; d < map.size(); d += 97) {
    const Point3& p = data->cloud[map[d].get<std::size_t>()];
    EXPECT_EQ(pts[d][0].get<double>(), p.x);
    EXPECT_EQ(pts[d][1].get<double>(), p.y);
    EXPECT_EQ(pts[d][2].get<double>(), p.z);
  }
  const Json err = call("GET", "/sequences/drive/frames/9", nullptr, 404);
  EXPECT_EQ(err["error"]["code"], "not_found");
}

TEST_F(ServiceTest, ClickOnCarRecoversBox) {
  new_session();
  const Json r = click_car(0);
  const TopViewBox b = r["box"].get<TopViewBox>();
  const TopViewBox truth = car_at_frame(0);
  EXPECT_LE(rad_to_deg(lidarlabel::testing::yaw_error(b.yaw, truth.yaw)), 3.0);
  EXPECT_NEAR(b.length, truth.length, 0.15);
  EXPECT_NEAR(b.width, truth.width, 0.15);
  EXPECT_LT(std::hypot(b.cx - truth.cx, b.cy - truth.cy), 0.15);
}

TEST_F(ServiceTest, ClickErrors) {
  new_session();
  const auto data = service_->frame("drive", 0, service_->config().params.ground);
  std::size_t ground_idx = 0;
  while (!data->ground.is_ground[ground_idx]) ++ground_idx;
  Json err = call("POST", "/sessions/s1/click", {{"frame", 0}, {"index", ground_idx}}, 422);
  EXPECT_EQ(err["error"]["code"], "seed_on_ground");
  err = call("POST", "/sessions/s1/click", {{"frame", 0}, {"x", -200.0}, {"y", 0.0}}, 422);
  EXPECT_EQ(err["error"]["code"], "no_seed");
  err = call("POST", "/sessions/s1/click", {{"frame", 2}, {"x", 10.0}, {"y", 3.0}}, 409);
  EXPECT_EQ(err["error"]["code"], "conflict");
  call("POST", "/sessions/nope/click", {{"frame", 0}, {"index", 0}}, 404);
}

TEST_F(ServiceTest, CreatePatchAndTrackPull) {
  new_session();
  const Json box = click_car(0)["box"];
  Json rec = call("POST", "/sessions/s1/annotations",
                  {{"frame", 0}, {"box", box}, {"source", "one_click"}}, 201);
  const auto id = rec["id"].get<std::uint64_t>();
  call("POST", "/sessions/s1/advance", Json::object());
  Json created = call("GET", "/sessions/s1")["annotations"];
  ASSERT_EQ(created.size(), 2u);
  const std::string path = "/sessions/s1/annotations/" + std::to_string(id + 1);
  const double cx = created[1]["box"]["cx"].get<double>();
  const double before = service_->snapshot("s1").tracks().at(id).state.x(0);
  const Json patched = call("PATCH", path, {{"dx", 0.2}});
  EXPECT_DOUBLE_EQ(patched["box"]["cx"].get<double>(), cx + 0.2);
  const double after = service_->snapshot("s1").tracks().at(id).state.x(0);
  EXPECT_GT(after, before);
  const Json err = call("PATCH", "/sessions/s1/annotations/99", {{"dx", 0.2}}, 404);
  EXPECT_EQ(err["error"]["code"], "not_found");
}

TEST_F(ServiceTest, PatchEmitsOneEventPerGesture) {
  new_session();
  const Json box = click_car(0)["box"];
  call("POST", "/sessions/s1/annotations", {{"frame", 0}, {"box", box}, {"source", "one_click"}},
       201);
  call("PATCH", "/sessions/s1/annotations/1", {{"dyaw", 0.1}});
  call("PATCH", "/sessions/s1/annotations/1", {{"dwidth", 0.1}, {"dlength", -0.1}});
  call("PATCH", "/sessions/s1/annotations/1", {{"class", "van"}});
  const auto log = service_->snapshot("s1").log();
  ASSERT_EQ(log.size(), 5u);
  EXPECT_EQ(log[0].kind, EventKind::kClick);
  EXPECT_EQ(log[1].kind, EventKind::kBoxCreate);
  EXPECT_EQ(log[2].kind, EventKind::kRotate);
  EXPECT_EQ(log[3].kind, EventKind::kResize);
  EXPECT_EQ(log[4].kind, EventKind::kClassAssign);
  const Json m = call("GET", "/sessions/s1/metrics");
  EXPECT_EQ(m["operations"], 3);
  EXPECT_EQ(m["mean_ops_per_instance"], 3.0);
}

TEST_F(ServiceTest, AdvanceTracksMovingCar) {
  new_session();
  call("POST", "/sessions/s1/annotations",
       {{"frame", 0}, {"box", click_car(0)["box"]}, {"source", "one_click"}}, 201);
  for (int k = 1; k < 4; ++k) {
    const Json adv = call("POST", "/sessions/s1/advance", Json::object());
    ASSERT_EQ(adv["proposals"].size(), 1u) << k;
    const TopViewBox b = adv["proposals"][0]["box"].get<TopViewBox>();
    const TopViewBox truth = car_at_frame(k);
    EXPECT_LT(std::hypot(b.cx - truth.cx, b.cy - truth.cy), 0.2) << k;
    EXPECT_EQ(adv["proposals"][0]["source"], "tracked");
  }
  const Json err = call("POST", "/sessions/s1/advance", Json::object(), 409);
  EXPECT_EQ(err["error"]["code"], "end_of_sequence");
  call("POST", "/sessions/s1/advance", {{"to", 7}}, 400);
}

TEST_F(ServiceTest, ReplayExportSaveLoad) {
  new_session();
  call("POST", "/sessions/s1/annotations",
       {{"frame", 0}, {"box", click_car(0)["box"]}, {"source", "one_click"}}, 201);
  call("PATCH", "/sessions/s1/annotations/1", {{"dx", 0.05}});
  call("POST", "/sessions/s1/advance", Json::object());
  const Json replay = call("GET", "/sessions/s1/replay");
  EXPECT_TRUE(replay["identical"].get<bool>());

  const Response exported = service_->handle("GET", "/sessions/s1/export/0", "");
  EXPECT_EQ(exported.status, 200);
  EXPECT_EQ(exported.content_type.rfind("text/plain", 0), 0u);
  EXPECT_EQ(exported.body, export_labels(service_->snapshot("s1"), 0));
  const Response csv = service_->handle("GET", "/sessions/s1/pointwise/0", "");
  EXPECT_EQ(csv.body.rfind("index,class\n", 0), 0u);

  call("POST", "/sessions/s1/save", Json::object());
  const Session saved = service_->snapshot("s1");
  EXPECT_EQ(load_session(root_ / "sessions" / "s1.json"), saved);

  // A second service instance resumes from disk.
  AnnotationService other(service_->config());
  const Response r = other.handle("POST", "/sessions",
                                  Json{{"sequence", "drive"}, {"id", "s1"}, {"load", true}}.dump());
  ASSERT_EQ(r.status, 201) << r.body;
  EXPECT_EQ(other.snapshot("s1"), saved);
}

TEST_F(ServiceTest, MalformedBodies) {
  new_session();
  Response r = service_->handle("POST", "/sessions/s1/click", "{not json");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(Json::parse(r.body)["error"]["code"], "parse_error");
  r = service_->handle("GET", "/nowhere", "");
  EXPECT_EQ(r.status, 404);
  call("POST", "/sessions", {{"sequence", "drive"}, {"id", "s1"}}, 409);
}

TEST_F(ServiceTest, HttpRoundTrip) {
  HttpServer server(*service_);
  const int port = server.bind_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/sequences");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(Json::parse(res->body)["sequences"][0]["id"], "drive");
  res = client.Post("/sessions", R"({"sequence": "drive", "id": "h"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  res = client.Get("/sessions/missing");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  server.stop();
  t.join();
}

TEST(ConfigTest, ParsesSectionsAndResolvesPaths) {
  const Json j = Json::parse(R"({
    "sequences": ["a"], "session_dir": "out", "port": 9000,
    "cluster": {"epsilon": 0.3}, "params": {"display_cap": 100}
  })");
  const ServiceConfig c = parse_config(j, "/data");
  ASSERT_EQ(c.sequences.size(), 1u);
  EXPECT_EQ(c.sequences[0], fs::path("/data/a"));
  EXPECT_EQ(c.session_dir, fs::path("/data/out"));
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.params.cluster.epsilon, 0.3);
  EXPECT_EQ(c.params.display_cap, 100u);
}

TEST(StatusMap, Codes) {
  EXPECT_EQ(http_status(ErrorCode::kLookup), 404);
  EXPECT_EQ(http_status(ErrorCode::kConflict), 409);
  EXPECT_EQ(http_status(ErrorCode::kEndOfSequence), 409);
  EXPECT_EQ(http_status(ErrorCode::kProtocol), 400);
  EXPECT_EQ(http_status(ErrorCode::kSeedOnGround), 422);
  EXPECT_EQ(http_status(ErrorCode::kIo), 500);
}

}  // namespace
}  // namespace lidarlabel::service
