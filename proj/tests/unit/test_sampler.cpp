#include <doctest.h>

#include "scenes.hpp"
#include "situ/sampler.hpp"

using namespace situ;
using testing::box;

namespace {

StandableGrid full_grid(double w, double d, double cell = 0.2) {
  StandableGrid g;
  g.cell_size = cell;
  const auto cols = static_cast<std::size_t>(w / cell);
  for (std::size_t r = 0; r < static_cast<std::size_t>(d / cell); ++r) g.rows.emplace_back(cols, '1');
  return g;
}

SceneScan sofa_room() {
  // Sofa backed against the west wall, facing +x; no samples so the wall decides.
  auto scan = testing::room_scan(
      "sofa_room", {box(1, "wall", {-0.05, 2, 1.3}, {0.05, 2.1, 1.3}),
                    box(22, "sofa", {0.47, 2.0, 0.4}, {0.45, 1.0, 0.4}),
                    box(19, "table", {1.75, 2.0, 0.25}, {0.3, 0.5, 0.25}),
                    box(24, "tv", {4.8, 2.0, 0.8}, {0.1, 0.6, 0.35})});
  scan.walls = {1};
  return scan;
}

double angle_between(Vec2 a, Vec2 b) {
  return std::abs(std::atan2(a.cross(b), a.dot(b)));
}

}  // namespace

TEST_CASE("eye pose bands") {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto stand = sample_eye_pose(SituationCategory::standing, seed);
    CHECK(stand.eye_height_cm >= 147.0);
    CHECK(stand.eye_height_cm <= 167.0);
    const auto sit = sample_eye_pose(SituationCategory::sitting, seed);
    CHECK(sit.eye_height_cm >= 71.5);
    CHECK(sit.eye_height_cm <= 81.5);
    CHECK(std::abs(sit.head_tilt_deg) <= 30.0);
    const auto again = sample_eye_pose(SituationCategory::sitting, seed);
    CHECK(again.eye_height_cm == sit.eye_height_cm);
  }
}

TEST_CASE("sitting on a wall-backed sofa faces away from the wall") {
  auto scan = sofa_room();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = sample_situation(scan, SituationCategory::sitting, seed);
    CHECK(s.anchor_id == 22);
    CHECK(s.brief_text == "sitting on sofa_22");
    CHECK(std::abs(s.pose.yaw) < 1e-9);  // +x, away from the wall at x=0
    CHECK(point_in_convex(footprint(scan.at(22).obb), s.pose.standing_point()));
    CHECK(s.pose.eye_height >= 0.715);
    CHECK(s.pose.eye_height <= 0.815);
  }
}

TEST_CASE("large seat without frontage is unsatisfiable") {
  auto scan = sofa_room();
  scan.objects.push_back(box(30, "cabinet", {1.3, 2.0, 0.45}, {0.2, 1.2, 0.45}));
  CHECK_THROWS_AS(sample_situation(scan, SituationCategory::sitting, 1), ClearanceUnsatisfiable);
}

TEST_CASE("backrest samples decide the facing") {
  auto scan = testing::room_scan("chair_room", {box(3, "chair", {2, 2, 0.45}, {0.25, 0.25, 0.45})});
  auto& chair = scan.objects[0];
  testing::add_samples(chair, 20, {0, 0, 1});
  testing::add_samples(chair, 14, {0, -1, 0});
  const auto s = sample_situation(scan, SituationCategory::sitting, 3);
  CHECK(s.pose.yaw == doctest::Approx(-kPi / 2));
  CHECK(s.pose.standing_point() == Vec2{2, 2});
}

TEST_CASE("no seat means no sitting anchor") {
  auto scan = testing::room_scan("bare", {box(1, "table", {1, 1, 0.4}, {0.5, 0.5, 0.4})});
  CHECK_THROWS_AS(sample_situation(scan, SituationCategory::sitting, 0), NoEligibleAnchor);
  CHECK_THROWS_AS(sample_situation(scan, SituationCategory::standing, 0), NoStandableFloor);
}

TEST_CASE("interacting with a counter whose front faces +x") {
  auto scan = testing::room_scan("kitchen", {box(2, "kitchen counter", {0.3, 2, 0.45}, {0.3, 0.9, 0.45})});
  testing::add_samples(scan.objects[0], 40, {1, 0, 0});
  scan.standable = compute_standable(scan.objects, 0.0, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}, 0.1);
  const auto dn = dominant_normal(scan.objects[0]);
  REQUIRE(dn);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = sample_situation(scan, SituationCategory::interacting, seed);
    const double gap = distance_to_convex(footprint(scan.objects[0].obb), s.pose.standing_point());
    CHECK(gap >= 0.3 - 1e-9);
    CHECK(gap <= 0.5 + 1e-9);
    CHECK(s.pose.standing_point().x > 0.6);
    CHECK(rad2deg(angle_between(s.pose.facing(), Vec2{-1, 0})) <= 5.0);
    CHECK(s.brief_text == "interacting with kitchen counter_2");
  }
}

TEST_CASE("standing anchor text records its clock position") {
  auto scan = testing::room_scan("hall", {box(8, "chair", {2.0, 2.0, 0.45}, {0.25, 0.25, 0.45}),
                                          box(9, "plant", {3.5, 3.5, 0.5}, {0.15, 0.15, 0.5})});
  scan.standable = compute_standable(scan.objects, 0.0, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}, 0.2);
  bool saw_three = false;
  for (std::uint64_t seed = 0; seed < 400 && !saw_three; ++seed) {
    const auto s = sample_situation(scan, SituationCategory::standing, seed);
    const auto& anchor = scan.at(s.anchor_id);
    // Oracle: clockwise bearing from heading, by cross/dot products.
    const Vec2 f = s.pose.facing();
    const Vec2 d = xy(anchor.obb.center) - s.pose.standing_point();
    const double cw = std::fmod(rad2deg(-std::atan2(f.cross(d), f.dot(d))) + 360.0, 360.0);
    if (s.anchor_id == 8 && std::abs(cw - 90.0) < 10.0) {
      CHECK(s.brief_text == "standing with chair_8 3 o'clock");
      saw_three = true;
    }
  }
  CHECK(saw_three);
}

TEST_CASE("situation payload strings") {
  auto scan = sofa_room();
  scan.objects.push_back(box(40, "lamp", {-3.0, 2.0, 0.5}, {0.1, 0.1, 0.5}, 0.0, {{Facet::color, "white"}}));
  scan.objects[2].attributes = {{Facet::material, "wooden"}, {Facet::color, "blue"}};
  Situation s;
  s.category = SituationCategory::sitting;
  s.anchor_id = 22;
  s.pose.position = {0.47, 2.0, 0.76};
  s.pose.yaw = 0.0;
  SamplerConfig cfg;
  const auto payload = build_situation_payload(scan, s, cfg);
  CHECK(payload["sofa_22"]["location"] == "below");
  // Table edge sits 0.98 m ahead of the seat point, so only the footprint gap decides reach.
  CHECK(payload["table_19"]["location"] == "front");
  CHECK(payload["table_19"]["attributes"].dump() == R"(["wooden","blue"])");
  CHECK(payload["lamp_40"]["location"] == "back");
  CHECK_FALSE(payload.contains("wall_1"));

  s.pose.position = {1.0, 2.0, 0.76};
  const auto near = build_situation_payload(scan, s, cfg);
  CHECK(near["table_19"]["location"] == "front, within arm reach");
  CHECK(near.begin().key() == "table_19");  // ordered by instance id
}

TEST_CASE("batches are deterministic with unique anchors") {
  const auto pair = make_fixture(4, {10, 3, {5.0, 4.0, 2.6}});
  const auto a = sample_situations(pair, 99);
  const auto b = sample_situations(pair, 99);
  REQUIRE(a.size() == b.size());
  CHECK(!a.empty());
  std::set<ObjectId> anchors;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(situation_to_json(a[i], pair.pair_id).dump() == situation_to_json(b[i], pair.pair_id).dump());
    const auto back = situation_from_json(nlohmann::json::parse(situation_to_json(a[i], pair.pair_id).dump()));
    CHECK(back.pose.yaw == a[i].pose.yaw);
    if (a[i].category != SituationCategory::standing) {
      CHECK(anchors.insert(a[i].anchor_id).second);
    }
  }
}
