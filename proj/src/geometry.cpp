#include "situ/geometry.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>

namespace situ {

void check_pose(const ObserverPose& pose) {
  if (!(pose.eye_height > 0.0)) throw ValidationError("observer eye_height must be positive");
  if (std::abs(pose.head_tilt) > 30.0) throw ValidationError("observer head_tilt outside [-30, 30]");
}

ClockHour::ClockHour(int h) : hour(h) {
  if (h < 1 || h > 12) throw Error("clock hour out of range: " + std::to_string(h));
}

double clockwise_angle(Vec2 standing_point, double yaw, Vec2 target) {
  const Vec2 d = target - standing_point;
  if (d.x == 0.0 && d.y == 0.0) return 0.0;
  return wrap_two_pi(yaw - std::atan2(d.y, d.x));
}

ClockHour hour_from_clockwise(double angle) {
  const double deg = rad2deg(wrap_two_pi(angle));
  long h = std::lround(deg / 30.0) % 12;
  return ClockHour(h == 0 ? 12 : static_cast<int>(h));
}

EgoPosition egocentric_position(const ObserverPose& observer, Vec3 target_center) {
  const Vec2 sp = observer.standing_point();
  const Vec2 t = xy(target_center);
  return {hour_from_clockwise(clockwise_angle(sp, observer.yaw, t)), (t - sp).norm()};
}

EgoPosition egocentric_position(const ObserverPose& observer, const ObjectInstance& target) {
  return egocentric_position(observer, target.obb.center);
}

Proximity proximity_bucket(ClockHour hour) {
  switch (hour.hour) {
    case 11:
    case 12:
    case 1:
      return Proximity::front;
    case 2:
    case 3:
    case 4:
      return Proximity::right;
    case 5:
    case 6:
    case 7:
      return Proximity::back;
    default:
      return Proximity::left;  // 8..10
  }
}

std::string to_string(Proximity p) {
  switch (p) {
    case Proximity::front: return "front";
    case Proximity::left: return "left";
    case Proximity::right: return "right";
    case Proximity::back: return "back";
  }
  return "front";
}

std::string to_string(VerticalKind k) {
  switch (k) {
    case VerticalKind::standing_on: return "standing on";
    case VerticalKind::lying_on: return "lying on";
    case VerticalKind::supported_by: return "supported by";
    case VerticalKind::hanging_on: return "hanging on";
    case VerticalKind::attached_to: return "attached to";
  }
  return "standing on";
}

std::optional<VerticalKind> vertical_kind_from_string(const std::string& s) {
  for (auto k : {VerticalKind::standing_on, VerticalKind::lying_on, VerticalKind::supported_by,
                 VerticalKind::hanging_on, VerticalKind::attached_to}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

bool has_vertical_face(const std::string& label) {
  return label == "wall" || label == "door" || label == "doorframe";
}

}  // namespace

std::optional<VerticalRelation> vertical_relation(const ObjectInstance& a, const ObjectInstance& b,
                                                  const GeometryConfig& cfg) {
  if (a.id == b.id) throw Error("vertical_relation needs two distinct objects");
  if (is_structural(a.label) || b.label == "floor" || b.label == "ceiling") return std::nullopt;

  const Polygon fa = footprint(a.obb);
  const Polygon fb = footprint(b.obb);
  const double area_a = polygon_area(fa);

  if (has_vertical_face(b.label)) {
    const bool z_overlap = a.obb.bottom() < b.obb.top() && b.obb.bottom() < a.obb.top();
    if (!z_overlap) return std::nullopt;
    const double inside = polygon_area(clip_convex(fa, fb)) / area_a;
    if (inside >= 0.5) return VerticalRelation{a.id, b.id, VerticalKind::attached_to};
    if (convex_distance(fa, fb) <= cfg.contact_gap_m) {
      return VerticalRelation{a.id, b.id, VerticalKind::hanging_on};
    }
    return std::nullopt;
  }

  const double gap = a.obb.bottom() - b.obb.top();
  if (std::abs(gap) > cfg.contact_gap_m || a.obb.center.z <= b.obb.center.z) return std::nullopt;
  const double overlap = polygon_area(clip_convex(fa, fb)) / area_a;
  if (overlap <= 0.0) return std::nullopt;
  if (overlap < cfg.overlap_frac) return VerticalRelation{a.id, b.id, VerticalKind::supported_by};

  const double height = 2.0 * a.obb.half_extents.z;
  const double edge = 2.0 * std::max(a.obb.half_extents.x, a.obb.half_extents.y);
  const auto kind = height / edge >= cfg.lying_aspect ? VerticalKind::standing_on
                                                      : VerticalKind::lying_on;
  return VerticalRelation{a.id, b.id, kind};
}

std::vector<VerticalRelation> vertical_relations(const SceneScan& scan, const GeometryConfig& cfg) {
  std::vector<VerticalRelation> out;
  for (const auto& a : scan.objects) {
    for (const auto& b : scan.objects) {
      if (a.id == b.id) continue;
      if (auto rel = vertical_relation(a, b, cfg)) out.push_back(*rel);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& l, const auto& r) {
    return std::pair(l.subject_id, l.object_id) < std::pair(r.subject_id, r.object_id);
  });
  return out;
}

std::optional<DominantNormal> dominant_normal(const ObjectInstance& obj, const GeometryConfig& cfg) {
  if (obj.samples.size() < kMinNormalSamples) {
    throw Error("dominant_normal needs at least " + std::to_string(kMinNormalSamples) +
                " surface samples on " + obj.key());
  }
  constexpr int kBins = 36;  // 10 degree bins centred on multiples of 10 degrees
  std::array<int, kBins> count{};
  std::array<Vec2, kBins> sum{};
  for (const auto& s : obj.samples) {
    const Vec3& n = s.normal;
    if (std::abs(n.z) >= 0.5) continue;  // up/down facing
    const double deg = rad2deg(wrap_two_pi(std::atan2(n.y, n.x)));
    const int bin = static_cast<int>(std::floor((deg + 5.0) / 10.0)) % kBins;
    ++count[bin];
    sum[bin] = sum[bin] + Vec2{n.x, n.y};
  }
  const auto best = std::max_element(count.begin(), count.end()) - count.begin();
  const double coverage = static_cast<double>(count[best]) / static_cast<double>(obj.samples.size());
  if (count[best] == 0 || coverage < cfg.dominant_frac) return std::nullopt;
  const Vec2 m = sum[best];
  const double len = m.norm();
  return DominantNormal{{m.x / len, m.y / len, 0.0}, coverage};
}

double displacement(const ChangeRecord& change, const ScanPair& pair) {
  if (change.kind != ChangeKind::rigid) {
    throw Error("displacement is defined for rigid changes only, got " + to_string(change.kind));
  }
  if (!change.object_id_prev || !change.object_id_curr) {
    throw Error("rigid change without both object ids");
  }
  const auto prev = pair.aligned_prev_obb(*change.object_id_prev);
  const auto* curr = pair.curr.find(*change.object_id_curr);
  if (!prev || !curr) throw Error("rigid change references an unknown object");
  return (prev->center - curr->obb.center).norm();
}

std::vector<ObjectId> route_obstacles(const ObserverPose& observer, const ObjectInstance& target,
                                      const ScanPair& pair, const GeometryConfig& cfg) {
  const Vec2 from = observer.standing_point();
  const Polygon lane = corridor(from, xy(target.obb.center), cfg.corridor_width_m);
  std::vector<std::pair<double, ObjectId>> hits;
  for (const auto& ch : pair.changes) {
    if (ch.kind != ChangeKind::rigid && ch.kind != ChangeKind::added) continue;
    if (!ch.object_id_curr || *ch.object_id_curr == target.id) continue;
    const auto* obj = pair.curr.find(*ch.object_id_curr);
    if (obj == nullptr) continue;
    if (convex_intersect(footprint(obj->obb), lane)) {
      hits.emplace_back((xy(obj->obb.center) - from).norm(), obj->id);
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<ObjectId> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.second);
  return out;
}

// --- planar helpers -------------------------------------------------------------------------------

Polygon footprint(const Obb& box) {
  const Vec2 c = xy(box.center);
  const double hx = box.half_extents.x;
  const double hy = box.half_extents.y;
  Polygon poly;
  for (Vec2 corner : {Vec2{hx, -hy}, Vec2{hx, hy}, Vec2{-hx, hy}, Vec2{-hx, -hy}}) {
    poly.push_back(c + rotate(corner, box.yaw));
  }
  // Starting at (+x,-y) and walking +y, -x, -y keeps the loop counter-clockwise.
  return poly;
}

double polygon_area(const Polygon& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    acc += poly[i].cross(poly[(i + 1) % poly.size()]);
  }
  return std::abs(acc) * 0.5;
}

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Vec2 a = clip[i];
    const Vec2 b = clip[(i + 1) % clip.size()];
    const Vec2 edge = b - a;
    auto side = [&](Vec2 p) { return edge.cross(p - a); };
    Polygon in = std::move(out);
    out.clear();
    for (std::size_t j = 0; j < in.size(); ++j) {
      const Vec2 p = in[j];
      const Vec2 q = in[(j + 1) % in.size()];
      const double sp = side(p);
      const double sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
  }
  return out;
}

namespace {

bool separated_on_axes(const Polygon& a, const Polygon& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 e = a[(i + 1) % a.size()] - a[i];
    const Vec2 axis{-e.y, e.x};
    double amin = std::numeric_limits<double>::max(), amax = -amin;
    double bmin = amin, bmax = -amin;
    for (const auto& p : a) {
      amin = std::min(amin, axis.dot(p));
      amax = std::max(amax, axis.dot(p));
    }
    for (const auto& p : b) {
      bmin = std::min(bmin, axis.dot(p));
      bmax = std::max(bmax, axis.dot(p));
    }
    if (amax < bmin || bmax < amin) return true;
  }
  return false;
}

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

bool convex_intersect(const Polygon& a, const Polygon& b) {
  return !separated_on_axes(a, b) && !separated_on_axes(b, a);
}

bool point_in_convex(const Polygon& poly, Vec2 p) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % poly.size()];
    if ((b - a).cross(p - a) < 0.0) return false;
  }
  return true;
}

double distance_to_convex(const Polygon& poly, Vec2 p) {
  if (point_in_convex(poly, p)) return 0.0;
  double best = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    best = std::min(best, segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  }
  return best;
}

double convex_distance(const Polygon& a, const Polygon& b) {
  if (convex_intersect(a, b)) return 0.0;
  double best = std::numeric_limits<double>::max();
  for (const auto& p : a) best = std::min(best, distance_to_convex(b, p));
  for (const auto& p : b) best = std::min(best, distance_to_convex(a, p));
  return best;
}

Polygon corridor(Vec2 from, Vec2 to, double width) {
  Vec2 d = to - from;
  const double len = d.norm();
  const Vec2 dir = len > 0.0 ? (1.0 / len) * d : Vec2{1.0, 0.0};
  const Vec2 n = (width / 2.0) * Vec2{-dir.y, dir.x};
  return {from - n, to - n, to + n, from + n};
}

// --- rendering ------------------------------------------------------------------------------------

double round_to(double value, double step) {
  const double r = std::round(value / step) * step;
  return r == 0.0 ? 0.0 : r;
}

std::string format_meters(double meters, double step) {
  int decimals = 0;
  for (double s = step; s < 1.0 - 1e-12 && decimals < 6; s *= 10.0) ++decimals;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*fm", decimals, round_to(meters, step));
  return buf;
}

std::string format_location(const EgoPosition& pos, double step) {
  return std::to_string(pos.hour.hour) + " o'clock, " + format_meters(pos.distance, step);
}

}  // namespace situ
