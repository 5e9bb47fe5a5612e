#include "situ/sampler.hpp"

#include <algorithm>
#include <random>

namespace situ {

using nlohmann::ordered_json;

std::string to_string(SituationCategory c) {
  switch (c) {
    case SituationCategory::sitting: return "sitting";
    case SituationCategory::standing: return "standing";
    case SituationCategory::interacting: return "interacting";
  }
  return "standing";
}

SituationCategory situation_category_from_string(const std::string& s) {
  for (auto c : {SituationCategory::sitting, SituationCategory::standing,
                 SituationCategory::interacting}) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown situation category: " + s);
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& label, std::uint64_t index) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::uint64_t z = base ^ h ^ (index * 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;  // splitmix64 finaliser
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

EyePose sample_eye_pose(SituationCategory category, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const bool sitting = category == SituationCategory::sitting;
  std::uniform_real_distribution<double> height(sitting ? 71.5 : 147.0, sitting ? 81.5 : 167.0);
  std::uniform_real_distribution<double> tilt(-30.0, 30.0);
  EyePose pose;
  pose.eye_height_cm = height(rng);
  pose.head_tilt_deg = tilt(rng);
  return pose;
}

std::optional<SeatGroup> seat_group(const std::string& label, const SeatGroups& groups) {
  auto in = [&](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), label) != v.end();
  };
  if (in(groups.large_back)) return SeatGroup::large_back;
  if (in(groups.small_back)) return SeatGroup::small_back;
  if (in(groups.large_noback)) return SeatGroup::large_noback;
  if (in(groups.small_noback)) return SeatGroup::small_noback;
  return std::nullopt;
}

namespace {

bool is_wall(const SceneScan& scan, const ObjectInstance& o) {
  return o.label == "wall" || std::find(scan.walls.begin(), scan.walls.end(), o.id) != scan.walls.end();
}

Vec2 room_centroid(const SceneScan& scan) {
  Vec2 sum;
  for (const auto& o : scan.objects) sum = sum + xy(o.obb.center);
  return (1.0 / static_cast<double>(scan.objects.size())) * sum;
}

Vec2 unit(Vec2 v) { return (1.0 / v.norm()) * v; }

// Extent of the box from its center along unit direction d.
double support_extent(const Obb& box, Vec2 d) {
  const Vec2 ax = rotate({1.0, 0.0}, box.yaw);
  const Vec2 ay = rotate({0.0, 1.0}, box.yaw);
  return std::abs(d.dot(ax)) * box.half_extents.x + std::abs(d.dot(ay)) * box.half_extents.y;
}

bool blocked_by_others(const SceneScan& scan, const Polygon& region, ObjectId self) {
  for (const auto& o : scan.objects) {
    if (o.id == self || !blocks_floor(o, scan.floor_height)) continue;
    if (convex_intersect(footprint(o.obb), region)) return true;
  }
  return false;
}

bool free_point(const SceneScan& scan, Vec2 p) {
  if (scan.standable && !scan.standable->standable_at(p)) return false;
  for (const auto& o : scan.objects) {
    if (blocks_floor(o, scan.floor_height) && point_in_convex(footprint(o.obb), p)) return false;
  }
  return true;
}

ObserverPose make_pose(const SceneScan& scan, Vec2 at, double yaw, const EyePose& eye) {
  ObserverPose pose;
  pose.eye_height = eye.eye_height_cm / 100.0;
  pose.position = {at.x, at.y, scan.floor_height + pose.eye_height};
  pose.yaw = wrap_pi(yaw);
  pose.head_tilt = eye.head_tilt_deg;
  return pose;
}

Situation sample_sitting(const SceneScan& scan, std::mt19937_64& rng, const EyePose& eye,
                         const SamplerConfig& cfg, const std::set<ObjectId>& taken) {
  std::vector<const ObjectInstance*> seats;
  for (const auto& o : scan.objects) {
    if (!taken.count(o.id) && seat_group(o.label, cfg.seats)) seats.push_back(&o);
  }
  if (seats.empty()) throw NoEligibleAnchor("no seat available for a sitting situation in " + scan.scan_id);
  std::shuffle(seats.begin(), seats.end(), rng);

  std::optional<std::string> last_error;
  for (const auto* seat : seats) {
    const auto group = *seat_group(seat->label, cfg.seats);
    std::optional<Vec2> facing;
    if (group == SeatGroup::large_back || group == SeatGroup::small_back) facing = seat_facing(scan, *seat, cfg);
    if (!facing) {
      const Vec2 to_center = room_centroid(scan) - xy(seat->obb.center);
      facing = to_center.norm() > 1e-9 ? unit(to_center) : rotate({1.0, 0.0}, seat->obb.yaw);
    }
    Vec2 point = xy(seat->obb.center);
    if (group == SeatGroup::large_back || group == SeatGroup::large_noback) {
      // Slide along the seat's lateral axis looking for open frontage.
      const Vec2 lateral{-facing->y, facing->x};
      const double half_width = support_extent(seat->obb, lateral);
      const double depth = support_extent(seat->obb, *facing);
      std::vector<Vec2> ok;
      const int steps = 9;
      for (int i = 0; i < steps; ++i) {
        const double s = (half_width - 0.25 > 0.0)
                             ? -(half_width - 0.25) + 2.0 * (half_width - 0.25) * i / (steps - 1)
                             : 0.0;
        const Vec2 p = xy(seat->obb.center) + s * lateral;
        const Vec2 edge = p + depth * *facing;
        const Polygon front = corridor(edge + 0.01 * *facing, edge + cfg.frontage_min_m * *facing, 0.5);
        if (!blocked_by_others(scan, front, seat->id) && point_in_convex(footprint(seat->obb), p)) {
          ok.push_back(p);
        }
      }
      if (ok.empty()) {
        last_error = "no open frontage in front of " + seat->key();
        continue;
      }
      point = ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
    }
    Situation s;
    s.category = SituationCategory::sitting;
    s.anchor_id = seat->id;
    s.pose = make_pose(scan, point, std::atan2(facing->y, facing->x), eye);
    s.brief_text = "sitting on " + seat->key();
    return s;
  }
  throw ClearanceUnsatisfiable(*last_error);
}

Situation sample_interacting(const SceneScan& scan, std::mt19937_64& rng, const EyePose& eye,
                             const SamplerConfig& cfg, const GeometryConfig& geo,
                             const std::set<ObjectId>& taken) {
  std::vector<std::pair<const ObjectInstance*, DominantNormal>> anchors;
  for (const auto& o : scan.objects) {
    if (taken.count(o.id) || is_structural(o.label) || o.samples.size() < kMinNormalSamples) continue;
    if (auto dn = dominant_normal(o, geo)) anchors.emplace_back(&o, *dn);
  }
  if (anchors.empty()) throw NoEligibleAnchor("no interactable object in " + scan.scan_id);
  if (!scan.standable || scan.standable->standable_count() == 0) {
    throw NoStandableFloor("scan " + scan.scan_id + " has no standable floor");
  }
  std::shuffle(anchors.begin(), anchors.end(), rng);
  const double max_delta = deg2rad(std::max(0.0, cfg.interact_max_deg - 1.0));
  std::uniform_real_distribution<double> delta(-max_delta, max_delta);
  std::uniform_real_distribution<double> gap(cfg.interact_min_m, cfg.interact_max_m);
  for (const auto& [obj, dn] : anchors) {
    const Polygon fp = footprint(obj->obb);
    const Vec2 c = xy(obj->obb.center);
    const double reach = support_extent(obj->obb, {1.0, 0.0}) + support_extent(obj->obb, {0.0, 1.0});
    for (int attempt = 0; attempt < 64; ++attempt) {
      const Vec2 dir = rotate(xy(dn.direction), delta(rng));
      const double want = gap(rng);
      double lo = 0.0, hi = reach + want + 1.0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (distance_to_convex(fp, c + mid * dir) < want ? lo : hi) = mid;
      }
      const Vec2 p = c + hi * dir;
      if (!free_point(scan, p)) continue;
      Situation s;
      s.category = SituationCategory::interacting;
      s.anchor_id = obj->id;
      const Vec2 look = c - p;
      s.pose = make_pose(scan, p, std::atan2(look.y, look.x), eye);
      s.brief_text = "interacting with " + obj->key();
      return s;
    }
  }
  throw NoStandableFloor("no standable point in front of any interactable object in " + scan.scan_id);
}

}  // namespace

std::optional<Vec2> seat_facing(const SceneScan& scan, const ObjectInstance& seat,
                                const SamplerConfig& cfg) {
  if (seat.samples.size() >= kMinNormalSamples) {
    GeometryConfig any_bin;
    any_bin.dominant_frac = 1e-12;
    if (auto dn = dominant_normal(seat, any_bin)) return xy(dn->direction);
  }
  const Polygon fp = footprint(seat.obb);
  const ObjectInstance* best = nullptr;
  double best_d = cfg.backrest_wall_m;
  for (const auto& o : scan.objects) {
    if (!is_wall(scan, o)) continue;
    const double d = convex_distance(fp, footprint(o.obb));
    if (d <= best_d) {
      best_d = d;
      best = &o;
    }
  }
  if (best == nullptr) return std::nullopt;
  // Face away from the wall: from its nearest footprint point toward the seat center.
  const Vec2 c = xy(seat.obb.center);
  const Polygon wall = footprint(best->obb);
  Vec2 nearest = wall[0];
  double nd = 1e300;
  for (std::size_t i = 0; i < wall.size(); ++i) {
    const Vec2 a = wall[i], b = wall[(i + 1) % wall.size()];
    const Vec2 ab = b - a;
    const double t = std::clamp((c - a).dot(ab) / ab.dot(ab), 0.0, 1.0);
    const Vec2 q = a + t * ab;
    if ((c - q).norm() < nd) {
      nd = (c - q).norm();
      nearest = q;
    }
  }
  const Vec2 away = c - nearest;
  if (away.norm() < 1e-9) return std::nullopt;
  return unit(away);
}

Situation sample_situation(const SceneScan& scan, SituationCategory category, std::uint64_t seed,
                           const SamplerConfig& cfg, const GeometryConfig& geo,
                           const std::set<ObjectId>& taken) {
  if (scan.objects.empty()) throw NoEligibleAnchor("scan " + scan.scan_id + " has no objects");
  std::mt19937_64 rng(seed);
  const EyePose eye = sample_eye_pose(category, derive_seed(seed, "eye", 0));
  switch (category) {
    case SituationCategory::sitting:
      return sample_sitting(scan, rng, eye, cfg, taken);
    case SituationCategory::interacting:
      return sample_interacting(scan, rng, eye, cfg, geo, taken);
    case SituationCategory::standing:
      break;
  }

  if (!scan.standable || scan.standable->standable_count() == 0) {
    throw NoStandableFloor("scan " + scan.scan_id + " has no standable floor");
  }
  bool has_anchor = false;
  for (const auto& o : scan.objects) has_anchor |= !is_structural(o.label);
  if (!has_anchor) throw NoEligibleAnchor("scan " + scan.scan_id + " has only structural objects");

  const auto& grid = *scan.standable;
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t r = 0; r < grid.rows.size(); ++r) {
    for (std::size_t c = 0; c < grid.rows[r].size(); ++c) {
      if (grid.rows[r][c] == '1') cells.emplace_back(r, c);
    }
  }
  const auto [row, col] = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
  std::uniform_real_distribution<double> jitter(-0.45 * grid.cell_size, 0.45 * grid.cell_size);
  const Vec2 at = grid.cell_center(row, col) + Vec2{jitter(rng), jitter(rng)};
  const double yaw = std::uniform_real_distribution<double>(-kPi, kPi)(rng);

  const ObjectInstance* anchor = nullptr;
  double best = 1e300;
  for (const auto& o : scan.objects) {
    if (is_structural(o.label)) continue;
    const double d = (xy(o.obb.center) - at).norm();
    if (d < best) {
      best = d;
      anchor = &o;
    }
  }
  Situation s;
  s.category = SituationCategory::standing;
  s.anchor_id = anchor->id;
  s.pose = make_pose(scan, at, yaw, eye);
  const auto pos = egocentric_position(s.pose, *anchor);
  s.brief_text = "standing with " + anchor->key() + " " + std::to_string(pos.hour.hour) + " o'clock";
  return s;
}

std::vector<Situation> sample_situations(const ScanPair& pair, std::uint64_t seed,
                                         const SamplerConfig& cfg, const GeometryConfig& geo) {
  std::vector<Situation> out;
  const std::pair<SituationCategory, int> plan[] = {
      {SituationCategory::sitting, cfg.sitting_per_pair},
      {SituationCategory::standing, cfg.standing_per_pair},
      {SituationCategory::interacting, cfg.interacting_per_pair},
  };
  std::set<ObjectId> taken;
  std::set<std::pair<ObjectId, int>> standing_seen;
  for (const auto& [category, count] : plan) {
    const std::string name = to_string(category);
    int made = 0;
    for (int draw = 0; made < count && draw < count * 8; ++draw) {
      Situation s;
      try {
        s = sample_situation(pair.curr, category, derive_seed(seed, pair.pair_id + "/" + name, draw),
                             cfg, geo, taken);
      } catch (const NoEligibleAnchor&) {
        break;
      } catch (const NoStandableFloor&) {
        break;
      } catch (const ClearanceUnsatisfiable&) {
        break;
      }
      if (category == SituationCategory::standing) {
        // Repeated standing anchors must at least sit at a different clock position.
        const int hour = egocentric_position(s.pose, pair.curr.at(s.anchor_id)).hour.hour;
        if (taken.count(s.anchor_id) && standing_seen.count({s.anchor_id, hour})) continue;
        standing_seen.insert({s.anchor_id, hour});
      }
      taken.insert(s.anchor_id);
      s.situation_id = pair.pair_id + ":" + name + ":" + std::to_string(made);
      out.push_back(std::move(s));
      ++made;
    }
  }
  return out;
}

ordered_json build_situation_payload(const SceneScan& scan, const Situation& situation,
                                     const SamplerConfig& cfg, const GeometryConfig& geo) {
  std::vector<const ObjectInstance*> objs;
  for (const auto& o : scan.objects) {
    if (!is_structural(o.label)) objs.push_back(&o);
  }
  std::sort(objs.begin(), objs.end(), [](auto* a, auto* b) { return a->id < b->id; });
  const Vec2 at = situation.pose.standing_point();
  ordered_json out = ordered_json::object();
  for (const auto* o : objs) {
    const auto pos = egocentric_position(situation.pose, *o);
    const bool is_anchor = o->id == situation.anchor_id;
    if (pos.distance > cfg.payload_radius_m && !is_anchor) continue;
    ordered_json entry = ordered_json::object();
    if (!o->attributes.empty()) {
      ordered_json attrs = ordered_json::array();
      for (const auto& a : o->attributes) attrs.push_back(a.value);
      entry["attributes"] = attrs;
    }
    if (is_anchor && situation.category == SituationCategory::sitting) {
      entry["location"] = "below";
    } else {
      std::string loc = to_string(proximity_bucket(pos.hour));
      if (distance_to_convex(footprint(o->obb), at) <= geo.arm_reach_m) loc += ", within arm reach";
      entry["location"] = loc;
    }
    out[o->key()] = entry;
  }
  return out;
}

ordered_json situation_to_json(const Situation& s, const std::string& pair_id) {
  ordered_json j;
  j["scan_pair_id"] = pair_id;
  j["situation_id"] = s.situation_id;
  j["category"] = to_string(s.category);
  j["anchor"] = s.anchor_id;
  j["pose"] = {{"position", {s.pose.position.x, s.pose.position.y, s.pose.position.z}},
               {"yaw", s.pose.yaw},
               {"eye_height", s.pose.eye_height},
               {"head_tilt", s.pose.head_tilt}};
  j["brief_text"] = s.brief_text;
  if (s.descriptive_text) {
    j["descriptive_text"] = *s.descriptive_text;
    j["reference_ids"] = s.reference_ids;
  }
  return j;
}

Situation situation_from_json(const nlohmann::json& j) {
  try {
    Situation s;
    s.situation_id = j.at("situation_id").get<std::string>();
    s.category = situation_category_from_string(j.at("category").get<std::string>());
    s.anchor_id = j.at("anchor").get<ObjectId>();
    const auto& p = j.at("pose");
    const auto& pos = p.at("position");
    s.pose.position = {pos.at(0).get<double>(), pos.at(1).get<double>(), pos.at(2).get<double>()};
    s.pose.yaw = p.at("yaw").get<double>();
    s.pose.eye_height = p.at("eye_height").get<double>();
    s.pose.head_tilt = p.at("head_tilt").get<double>();
    s.brief_text = j.at("brief_text").get<std::string>();
    if (j.contains("descriptive_text")) {
      s.descriptive_text = j.at("descriptive_text").get<std::string>();
      s.reference_ids = j.value("reference_ids", std::vector<ObjectId>{});
    }
    check_pose(s.pose);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("situation record: ") + e.what());
  }
}

}  // namespace situ
