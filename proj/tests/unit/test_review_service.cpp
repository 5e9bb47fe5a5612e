#include <doctest.h>

#include <httplib.h>
#include <unistd.h>

#include <fstream>
#include <thread>

#include "scenes.hpp"
#include "situ/review_service.hpp"

using namespace situ;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

PipelineConfig scene_config(const std::string& name) {
  const auto root = fs::temp_directory_path() / ("situ_review_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(root);
  write_scan_pair(testing::feature_scene(), root / "data");
  PipelineConfig cfg;
  cfg.paths.data_root = (root / "data").string();
  cfg.paths.output_dir = (root / "out").string();
  RunOptions opts;
  opts.stages = {Stage::ingest, Stage::situations, Stage::context, Stage::queries};
  opts.threads = 1;
  run_pipeline(cfg, opts);
  return cfg;
}

json body(const HttpResponse& r) { return json::parse(r.body); }

std::string decision(const std::string& action, const std::string& feature, int version,
                     const std::string& text = "") {
  json j{{"action", action}, {"version", version}};
  if (!feature.empty()) j["feature"] = feature;
  if (action == "manual") j["text"] = text;
  return j.dump();
}

}  // namespace

TEST_CASE("task listing and filtering") {
  const auto cfg = scene_config("list");
  ReviewService svc(cfg);
  const auto all = body(svc.list_tasks(""));
  CHECK(all["tasks"].size() == 4);
  CHECK(all["tasks"][0]["status"] == "pending");

  const auto pending = body(svc.list_tasks("pending"));
  REQUIRE(pending["tasks"].size() == 1);
  CHECK(pending["tasks"][0]["task_id"] == "feature_scene:14");
  CHECK(svc.list_tasks("bogus").status == 400);

  const auto task = svc.get_task("feature_scene:11");
  REQUIRE(task.status == 200);
  const auto t = body(task);
  CHECK(t["label"] == "chair");
  CHECK(t["geometry"].contains("objects"));
  CHECK(t["candidates"][0]["previews"]["description"].get<std::string>().find("nearest to the table") !=
        std::string::npos);
  CHECK(svc.get_task("feature_scene:99").status == 404);
  CHECK(svc.get_task("nope").status == 404);
}

TEST_CASE("decisions, conflicts and validation") {
  const auto cfg = scene_config("decide");
  ReviewService svc(cfg);
  const std::string id = "feature_scene:11";
  const auto feature = body(svc.get_task(id))["candidates"][0]["feature_id"].get<std::string>();

  auto r = svc.post_decision(id, decision("accept", feature, 0));
  REQUIRE(r.status == 200);
  CHECK(body(r)["status"] == "human_resolved");
  CHECK(body(r)["version"] == 1);

  r = svc.post_decision(id, decision("reject", feature, 0));
  CHECK(r.status == 409);
  CHECK(body(r)["version"] == 1);

  CHECK(svc.post_decision(id, decision("manual", "", 1, "   ")).status == 400);
  CHECK(svc.post_decision(id, decision("accept", "extremity_nearest:99:present", 1)).status == 400);
  CHECK(svc.post_decision(id, "{not json").status == 400);
  CHECK(svc.post_decision(id, R"({"action": "accept", "feature": "x"})").status == 400);
  CHECK(svc.post_decision("feature_scene:77", decision("accept", feature, 0)).status == 404);
}

TEST_CASE("rejecting every feature then adding a manual one drives the next query run") {
  const auto cfg = scene_config("loop");
  const Artifacts art(cfg.paths.output_dir);
  const std::string id = "feature_scene:11";
  {
    ReviewService svc(cfg);
    int version = 0;
    const auto task = body(svc.get_task(id));
    for (const auto& c : task["candidates"]) {
      const auto r = svc.post_decision(id, decision("reject", c["feature_id"], version));
      REQUIRE(r.status == 200);
      version = body(r)["version"];
    }
    CHECK(body(svc.get_task(id))["status"] == "pending");
    auto regen = body(svc.regen());
    CHECK(regen["tasks"]["pending"] == 2);
    std::ifstream q(art.queries(QueryTask::description));
    std::string text((std::istreambuf_iterator<char>(q)), {});
    CHECK(text.find("\"object_id\":11") == std::string::npos);

    const auto r = svc.post_decision(id, decision("manual", "", version, "between the blue and the orange chair"));
    REQUIRE(r.status == 200);
    CHECK(body(r)["queries"]["description"].get<std::string>().find("between the blue and the orange chair") !=
          std::string::npos);
    regen = body(svc.regen());
    CHECK(regen["tasks"]["human_resolved"] == 1);
  }
  std::ifstream q(art.queries(QueryTask::description));
  std::string text((std::istreambuf_iterator<char>(q)), {});
  CHECK(text.find("between the blue and the orange chair") != std::string::npos);
}

TEST_CASE("second writer is refused and replay restores state") {
  const auto cfg = scene_config("lock");
  const std::string id = "feature_scene:14";
  std::map<std::string, ObjectReview> before;
  {
    ReviewService svc(cfg);
    CHECK_THROWS_AS(ReviewService{cfg}, LockContention);
    REQUIRE(svc.post_decision(id, decision("manual", "", 0, "between the blue and the orange chair")).status == 200);
    before = svc.state().snapshot();
  }
  ReviewService again(cfg);
  const auto after = again.state().snapshot();
  REQUIRE(after.size() == before.size());
  CHECK(after.at(id).manual->text == before.at(id).manual->text);
  CHECK(after.at(id).version == before.at(id).version);
  CHECK(body(again.get_task(id))["status"] == "human_resolved");
}

TEST_CASE("HTTP routes over a loopback socket") {
  const auto cfg = scene_config("http");
  ReviewService svc(cfg);
  const int port = svc.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread server([&] { svc.serve(); });

  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);
  auto res = cli.Get("/tasks?status=pending");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["tasks"].size() == 1);

  res = cli.Get("/tasks/feature_scene:12");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto feature = json::parse(res->body)["candidates"][0]["feature_id"].get<std::string>();

  // Two reviewers race on the same version: exactly one wins.
  std::vector<int> statuses(2);
  std::vector<std::thread> racers;
  for (int i = 0; i < 2; ++i) {
    racers.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      auto r = c.Post("/tasks/feature_scene:12/decision", decision("accept", feature, 0), "application/json");
      statuses[i] = r ? r->status : -1;
    });
  }
  for (auto& t : racers) t.join();
  std::sort(statuses.begin(), statuses.end());
  CHECK(statuses == std::vector<int>{200, 409});

  res = cli.Post("/regen", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);

  svc.stop();
  server.join();
}

TEST_CASE("binding an occupied port fails") {
  const auto cfg = scene_config("bind");
  ReviewService a(cfg);
  const int port = a.bind("127.0.0.1", 0);
  const auto other = scene_config("bind2");
  ReviewService b(other);
  CHECK_THROWS_AS(b.bind("127.0.0.1", port), Error);
}
