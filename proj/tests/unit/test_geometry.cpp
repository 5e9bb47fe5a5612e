#include <doctest.h>

#include <random>

#include "scenes.hpp"
#include "situ/geometry.hpp"

using namespace situ;
using testing::box;

namespace {

ObserverPose facing(Vec2 at, double yaw) {
  ObserverPose p;
  p.position = {at.x, at.y, 1.57};
  p.yaw = yaw;
  return p;
}

// Independent bearing oracle: signed angle from facing to target, made clockwise.
int oracle_hour(Vec2 at, double yaw, Vec2 target) {
  const Vec2 f{std::cos(yaw), std::sin(yaw)};
  const Vec2 d = target - at;
  const double ccw = std::atan2(f.x * d.y - f.y * d.x, f.x * d.x + f.y * d.y);
  double cw_deg = -ccw * 180.0 / kPi;
  if (cw_deg < 0) cw_deg += 360.0;
  int h = static_cast<int>(std::lround(cw_deg / 30.0)) % 12;
  return h == 0 ? 12 : h;
}

}  // namespace

TEST_CASE("egocentric clock positions") {
  const auto north = facing({0, 0}, kPi / 2);
  auto p = egocentric_position(north, Vec3{0, 2.0, 0.5});
  CHECK(p.hour.hour == 12);
  CHECK(p.distance == doctest::Approx(2.0));
  p = egocentric_position(north, Vec3{1.0, 0, 0.5});
  CHECK(p.hour.hour == 3);
  CHECK(p.distance == doctest::Approx(1.0));

  const auto west = facing({1, 1}, kPi);
  p = egocentric_position(west, Vec3{1, 2, 0.3});
  CHECK(p.hour.hour == oracle_hour({1, 1}, kPi, {1, 2}));
  CHECK(p.hour.hour == 3);
  CHECK(p.distance == doctest::Approx(1.0));

  CHECK(format_location(egocentric_position(north, Vec3{-0.4, 0.6928203230275509, 0}), 0.1) ==
        "11 o'clock, 0.8m");
}

TEST_CASE("clock hour validity") {
  CHECK_THROWS(ClockHour(0));
  CHECK_THROWS(ClockHour(13));
  CHECK(hour_from_clockwise(deg2rad(359.0)).hour == 12);
  CHECK(hour_from_clockwise(deg2rad(14.9)).hour == 12);
  CHECK(hour_from_clockwise(deg2rad(15.1)).hour == 1);
}

TEST_CASE("proximity buckets follow the clock ranges") {
  const char* expected[] = {"", "front", "right", "right", "right", "back", "back",
                            "back", "left", "left", "left", "front", "front"};
  for (int h = 1; h <= 12; ++h) CHECK(to_string(proximity_bucket(ClockHour(h))) == expected[h]);
}

TEST_CASE("egocentric invariance under joint rotation and translation") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 5), ang(-kPi, kPi);
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec2 at{u(rng), u(rng)};
    const double yaw = ang(rng);
    const Vec3 target{u(rng), u(rng), 0.5};
    const auto base = egocentric_position(facing(at, yaw), target);
    // Skip placements sitting on an hour boundary where rounding may flip.
    const double cw = rad2deg(clockwise_angle(at, yaw, xy(target)));
    if (std::abs(std::fmod(cw, 30.0) - 15.0) < 1e-6) continue;
    const double r = ang(rng);
    const Vec2 shift{u(rng), u(rng)};
    const Vec2 at2 = rotate(at, r) + shift;
    const Vec2 t2 = rotate(xy(target), r) + shift;
    const auto moved = egocentric_position(facing(at2, yaw + r), Vec3{t2.x, t2.y, 0.5});
    CHECK(moved.hour == base.hour);
    CHECK(std::abs(moved.distance - base.distance) < 1e-9);
    CHECK(base.hour.hour == oracle_hour(at, yaw, xy(target)));
    ++checked;
  }
  CHECK(checked > 9990);
}

TEST_CASE("vertical relations") {
  const auto table = box(1, "table", {0, 0, 0.38}, {0.6, 0.4, 0.38});
  const auto cup = box(2, "cup", {0.1, 0, 0.76 + 0.005 + 0.06}, {0.04, 0.04, 0.06});
  auto rel = vertical_relation(cup, table);
  REQUIRE(rel);
  CHECK(rel->kind == VerticalKind::standing_on);
  CHECK_FALSE(vertical_relation(table, cup));

  const auto bed = box(3, "bed", {0, 0, 0.3}, {1.0, 0.8, 0.3});
  const auto blanket = box(4, "blanket", {0, 0, 0.62}, {0.8, 0.6, 0.02});
  rel = vertical_relation(blanket, bed);
  REQUIRE(rel);
  CHECK(rel->kind == VerticalKind::lying_on);

  const auto far = box(5, "chair", {3, 0, 0.45}, {0.25, 0.25, 0.45});
  CHECK_FALSE(vertical_relation(far, table));
  CHECK_FALSE(vertical_relation(table, far));

  const auto wall = box(6, "wall", {-2.05, 0, 1.3}, {0.05, 3, 1.3});
  const auto picture = box(7, "picture", {-1.99, 0, 1.5}, {0.01, 0.3, 0.2});
  rel = vertical_relation(picture, wall);
  REQUIRE(rel);
  CHECK(rel->kind == VerticalKind::hanging_on);
  const auto switch_plate = box(8, "light switch", {-2.04, 1, 1.2}, {0.02, 0.05, 0.05});
  rel = vertical_relation(switch_plate, wall);
  REQUIRE(rel);
  CHECK(rel->kind == VerticalKind::attached_to);

  CHECK_THROWS(vertical_relation(table, table));
}

TEST_CASE("standing/lying relations are antisymmetric") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.6), p(-0.5, 0.5), z(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const auto a = box(1, "a", {p(rng), p(rng), z(rng)}, {u(rng), u(rng), u(rng)}, p(rng));
    const auto b = box(2, "b", {p(rng), p(rng), z(rng)}, {u(rng), u(rng), u(rng)}, p(rng));
    const auto ab = vertical_relation(a, b);
    const auto ba = vertical_relation(b, a);
    const bool ab_on = ab && (ab->kind == VerticalKind::standing_on || ab->kind == VerticalKind::lying_on);
    const bool ba_on = ba && (ba->kind == VerticalKind::standing_on || ba->kind == VerticalKind::lying_on);
    CHECK_FALSE((ab_on && ba_on));
  }
}

TEST_CASE("dominant normal") {
  auto patch = box(1, "counter", {0, 0, 0.45}, {0.3, 0.9, 0.45});
  testing::add_samples(patch, 40, {1, 0, 0});
  auto dn = dominant_normal(patch);
  REQUIRE(dn);
  CHECK(dn->direction.x == doctest::Approx(1.0));
  CHECK(dn->coverage == doctest::Approx(1.0));

  auto mixed = box(2, "cabinet", {0, 0, 0.45}, {0.3, 0.5, 0.45});
  testing::add_samples(mixed, 70, {1, 0, 0});
  testing::add_samples(mixed, 30, {0, 0, 1});
  dn = dominant_normal(mixed);
  REQUIRE(dn);
  CHECK(dn->coverage == doctest::Approx(0.7));

  // Fibonacci hemisphere: normals spread evenly, so no bin dominates.
  auto ball = box(3, "clutter", {0, 0, 0.2}, {0.2, 0.2, 0.2});
  const int n = 400;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double zc = 1.0 - (i + 0.5) / n;
    const double r = std::sqrt(1.0 - zc * zc);
    ball.samples.push_back({{0, 0, 0}, {r * std::cos(golden * i), r * std::sin(golden * i), zc}});
  }
  CHECK_FALSE(dominant_normal(ball));

  auto sparse = box(4, "desk", {0, 0, 0.4}, {0.3, 0.6, 0.4});
  testing::add_samples(sparse, 31, {1, 0, 0});
  CHECK_THROWS(dominant_normal(sparse));
}

TEST_CASE("displacement") {
  auto pair = testing::route_scene();
  const auto* ch = pair.change_for(39);
  REQUIRE(ch);
  CHECK(displacement(*ch, pair) == doctest::Approx(1.6));
  CHECK(format_meters(displacement(*ch, pair), 0.1) == "1.6m");

  auto moved = pair;
  moved.prev.objects[2].obb.center = moved.curr.objects[2].obb.center - Vec3{0.3, 0.4, 0.0};
  CHECK(displacement(*moved.change_for(39), moved) == doctest::Approx(0.5));
  moved.prev.objects[2].obb.center = moved.curr.objects[2].obb.center;
  CHECK(displacement(*moved.change_for(39), moved) == 0.0);

  const ChangeRecord removed{22, std::nullopt, ChangeKind::removed, std::nullopt, {}};
  CHECK_THROWS(displacement(removed, pair));
}

TEST_CASE("route obstacles") {
  const auto pair = testing::route_scene();
  const auto observer = facing({0.5, 2.0}, 0.0);
  CHECK(route_obstacles(observer, pair.curr.at(3), pair) == std::vector<ObjectId>{39});
  CHECK(route_obstacles(observer, pair.curr.at(40), pair).empty());
  // The target itself is never its own obstacle.
  CHECK(route_obstacles(observer, pair.curr.at(39), pair).empty());
}

TEST_CASE("polygon helpers") {
  const auto sq = footprint(Obb{{0, 0, 0}, {1, 1, 1}, 0.3});
  CHECK(polygon_area(sq) == doctest::Approx(4.0));
  const auto other = footprint(Obb{{1, 0, 0}, {1, 1, 1}, 0.0});
  CHECK(convex_intersect(sq, other));
  CHECK(polygon_area(clip_convex(footprint(Obb{{0, 0, 0}, {1, 1, 1}, 0}), other)) ==
        doctest::Approx(2.0));
  CHECK(convex_distance(footprint(Obb{{0, 0, 0}, {1, 1, 1}, 0}),
                        footprint(Obb{{3, 0, 0}, {0.5, 0.5, 1}, 0})) == doctest::Approx(1.5));
  CHECK(format_meters(0.04, 0.1) == "0.0m");
  CHECK(format_meters(1.649, 0.1) == "1.6m");
}
