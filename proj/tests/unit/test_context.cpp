#include <doctest.h>

#include <set>

#include "scenes.hpp"
#include "situ/context.hpp"

using namespace situ;

namespace {

Situation observer_at(Vec2 at, double yaw, std::string id = "s0") {
  Situation s;
  s.situation_id = std::move(id);
  s.category = SituationCategory::standing;
  s.pose.position = {at.x, at.y, 1.57};
  s.pose.yaw = yaw;
  s.brief_text = "standing";
  return s;
}

}  // namespace

TEST_CASE("classify_changes partitions all ids") {
  const auto pair = testing::context_scene();
  const auto g = classify_changes(pair);
  CHECK(g.rigid == std::vector<ObjectId>{6});
  CHECK(g.removed == std::vector<ObjectId>{22, 23});
  CHECK(g.unchanged == std::vector<ObjectId>{7, 8, 9});
  CHECK(g.added.empty());

  auto plain = pair;
  plain.changes.clear();
  CHECK(classify_changes(plain).unchanged.size() == 6);
}

TEST_CASE("context payload reproduces the reference strings") {
  const auto pair = testing::context_scene();
  const auto sit = observer_at({0, 0}, kPi / 2);
  const auto ctx = build_context(pair, sit);
  const auto data = context_payload(ctx, pair, ContextShape::longform);

  const auto& chair = data["rigid"]["chair_6"];
  CHECK(chair["location"] == "11 o'clock, 0.8m");
  CHECK(chair["location_old"] == "12 o'clock, 1.0m");
  CHECK(chair["return"] == "2 o'clock, 0.5m");
  CHECK(chair["move_distance"] == "0.5m");
  CHECK(chair["Warning"].dump() == R"(["bed_9"])");  // now stands between the observer and the bed

  CHECK(data["removed"]["storage_22"]["location_old"] == "4 o'clock, 2.2m");
  CHECK_FALSE(data["removed"]["storage_22"].contains("location"));

  const auto& table = data["unchanged"]["table_7"];
  CHECK(table["allocentric_old"] == "monitor_8 standing on table_7, picture_23 lying on table_7");
  CHECK(table["allocentric"] == "monitor_8 standing on table_7");
  CHECK_FALSE(table.contains("move_distance"));

  std::vector<std::string> groups;
  for (auto it = data.begin(); it != data.end(); ++it) groups.push_back(it.key());
  CHECK(groups == std::vector<std::string>{"removed", "rigid", "unchanged"});

  std::vector<std::string> fields;
  for (auto it = chair.begin(); it != chair.end(); ++it) fields.push_back(it.key());
  CHECK(fields == std::vector<std::string>{"attributes", "location", "return", "location_old", "move_distance", "Warning"});
}

TEST_CASE("human text becomes Caption and Instruction") {
  auto pair = testing::context_scene();
  pair.changes[0].human_fields = HumanFields{"", "", "The chair was by the window.", "Move it one step right."};
  pair.changes[1].human_fields = HumanFields{"", "", "incomplete scan", "ignored for removed"};
  const auto ctx = build_context(pair, observer_at({0, 0}, kPi / 2));
  const auto data = context_payload(ctx, pair, ContextShape::longform);
  CHECK(data["rigid"]["chair_6"]["Caption"] == "The chair was by the window.");
  CHECK(data["rigid"]["chair_6"]["Instruction"] == "Move it one step right.");
  CHECK(data["removed"]["storage_22"]["Caption"] == "incomplete scan");
  CHECK_FALSE(data["removed"]["storage_22"].contains("Instruction"));

  const auto qa = context_payload(ctx, pair, ContextShape::qa);
  CHECK_FALSE(qa["rigid"]["chair_6"].contains("Caption"));
  CHECK(qa["rigid"]["chair_6"]["color"].dump() == R"(["black"])");
}

TEST_CASE("return vector") {
  auto pair = testing::context_scene();
  const auto sit = observer_at({0, 0}, kPi / 2);
  auto r = return_vector(pair.changes[0], sit, pair);
  CHECK(r.hour.hour == 2);
  CHECK(r.distance == doctest::Approx(0.5).epsilon(0.02));

  // Object pushed 0.5 m to the observer's left has to come back to the right.
  pair.prev.objects[0].obb.center = {0.5, 2.0, 0.45};
  pair.curr.objects[0].obb.center = {0.0, 2.0, 0.45};
  r = return_vector(pair.changes[0], sit, pair);
  CHECK(r.hour.hour == 3);
  CHECK(r.distance == doctest::Approx(0.5));

  pair.prev.objects[0].obb.center = pair.curr.objects[0].obb.center;
  CHECK(return_vector(pair.changes[0], sit, pair).distance == 0.0);
  CHECK_THROWS(return_vector(pair.changes[1], sit, pair));
}

TEST_CASE("warnings name blocked unique targets") {
  const auto pair = testing::route_scene();
  const auto ctx = build_context(pair, observer_at({0.5, 2.0}, 0.0));
  const auto* chair = ctx.find(39);
  REQUIRE(chair);
  CHECK(std::find(chair->warning.begin(), chair->warning.end(), 3) != chair->warning.end());
  const auto qa = context_payload(ctx, pair, ContextShape::qa);
  CHECK(qa["rigid"]["chair_39"]["move_distance"] == "1.6m");
  CHECK(qa["rigid"]["chair_39"]["Warning"][0] == "bed_3");
}

TEST_CASE("context invariants on fixtures") {
  const GeometryConfig geo;
  for (unsigned seed = 0; seed < 30; ++seed) {
    const auto pair = make_fixture(seed, {10, 4, {5.0, 4.0, 2.6}});
    for (const auto& sit : sample_situations(pair, seed)) {
      const auto ctx = build_context(pair, sit);
      const auto groups = classify_changes(pair);
      std::set<ObjectId> seen;
      std::size_t total = 0;
      for (const auto* v : {&groups.removed, &groups.added, &groups.rigid, &groups.non_rigid, &groups.unchanged}) {
        for (ObjectId id : *v) seen.insert(id);
        total += v->size();
      }
      CHECK(seen.size() == total);
      std::set<ObjectId> all;
      for (const auto& o : pair.prev.objects) all.insert(o.id);
      for (const auto& o : pair.curr.objects) all.insert(o.id);
      CHECK(seen == all);

      for (const auto& e : ctx.entries) {
        if (e.group == ContextGroup::rigid) {
          CHECK(e.location);
          CHECK(e.location_old);
          if (e.move_distance) {
            CHECK(std::abs(e.location_old->distance - e.location->distance) <= *e.move_distance + 1e-9);
            CHECK(format_meters(e.return_vec->distance, 0.1) == format_meters(*e.move_distance, 0.1));
          }
        } else {
          CHECK_FALSE(e.return_vec);
        }
        if (e.group == ContextGroup::removed) {
          CHECK_FALSE(e.location);
          CHECK(e.location_old);
        }
        if (e.group == ContextGroup::added) {
          CHECK(e.location);
          CHECK_FALSE(e.location_old);
        }
        if (!e.warning.empty()) {
          CHECK((e.group == ContextGroup::rigid || e.group == ContextGroup::added));
        }
      }
    }
  }
}

TEST_CASE("steps phrasing") {
  CHECK(steps_phrase(0.65, 0.65) == "one step");
  CHECK(steps_phrase(1.3, 0.65) == "two steps");
  CHECK(steps_phrase(0.98, 0.65) == "one and a half steps");
  CHECK(steps_phrase(0.3, 0.65) == "half a step");
  CHECK(steps_phrase(0.1, 0.65) == "less than half a step");
}

TEST_CASE("template long-form text") {
  const auto pair = testing::context_scene();
  const auto ctx = build_context(pair, observer_at({0, 0}, kPi / 2));
  const auto text = template_longform(*ctx.find(6));
  CHECK(text.description.find("11 o'clock, 0.8m") != std::string::npos);
  REQUIRE(text.rearrangement);
  CHECK(text.rearrangement->find("toward your 2 o'clock") != std::string::npos);
  CHECK_FALSE(template_longform(*ctx.find(22)).rearrangement);
}
