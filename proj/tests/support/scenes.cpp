#include "scenes.hpp"

namespace situ::testing {

ObjectInstance box(ObjectId id, const std::string& label, Vec3 center, Vec3 half, double yaw,
                   std::vector<Attribute> attrs) {
  ObjectInstance o;
  o.id = id;
  o.label = label;
  o.obb = {center, half, yaw};
  o.attributes = std::move(attrs);
  return o;
}

void add_samples(ObjectInstance& obj, int n, Vec3 normal) {
  const double len = normal.norm();
  const Vec3 unit = (1.0 / len) * normal;
  for (int i = 0; i < n; ++i) {
    const double f = (i + 0.5) / n - 0.5;
    const Vec3 p = obj.obb.center + Vec3{f * obj.obb.half_extents.x, f * obj.obb.half_extents.y,
                                         obj.obb.half_extents.z};
    obj.samples.push_back({p, unit});
  }
}

SceneScan room_scan(std::string id, std::vector<ObjectInstance> objects) {
  SceneScan s;
  s.scan_id = std::move(id);
  s.objects = std::move(objects);
  return s;
}

namespace {

ScanPair identity_pair(std::string id, const SceneScan& scan) {
  ScanPair p;
  p.pair_id = std::move(id);
  p.prev = scan;
  p.curr = scan;
  p.prev.scan_id = p.pair_id + "_prev";
  p.curr.scan_id = p.pair_id + "_curr";
  return p;
}

}  // namespace

ScanPair feature_scene() {
  const Attribute blue{Facet::color, "blue"};
  const Attribute orange{Facet::color, "orange"};
  const Attribute brown{Facet::color, "brown"};
  std::vector<ObjectInstance> objs = {
      box(5, "table", {2.0, 2.0, 0.38}, {0.6, 0.4, 0.38}, 0.0, {brown}),
      box(6, "sofa", {4.4, 2.0, 0.4}, {0.45, 1.0, 0.4}, 3.14159265358979, {{Facet::color, "gray"}}),
      box(7, "cup", {2.1, 2.0, 0.82}, {0.04, 0.04, 0.06}),
      box(11, "chair", {2.0, 1.2, 0.45}, {0.25, 0.25, 0.45}, 1.5707963267949, {brown}),
      box(12, "chair", {0.6, 3.2, 0.45}, {0.25, 0.25, 0.45}, 0.0, {blue}),
      box(13, "chair", {3.6, 3.5, 0.45}, {0.25, 0.25, 0.45}, 0.0, {orange}),
      box(14, "chair", {2.1, 3.4, 0.45}, {0.25, 0.25, 0.45}, 0.0, {brown}),
  };
  auto pair = identity_pair("feature_scene", room_scan("feature", objs));
  pair.prev.objects[6].obb.center = {2.1, 3.6, 0.45};
  pair.changes.push_back({14, 14, ChangeKind::rigid, RigidMotion{0.0, {0.0, -0.2, 0.0}}, {}});
  pair.changes.push_back({11, 11, ChangeKind::nonrigid, std::nullopt, {}});
  pair.changes.push_back({12, 12, ChangeKind::nonrigid, std::nullopt, {}});
  pair.changes.push_back({5, 5, ChangeKind::nonrigid, std::nullopt, {}});
  return pair;
}

ScanPair context_scene() {
  std::vector<ObjectInstance> curr = {
      box(6, "chair", {-0.4, 0.6928203230275509, 0.45}, {0.25, 0.25, 0.45}, 0.0,
          {{Facet::color, "black"}}),
      box(7, "table", {1.5, 2.0, 0.38}, {0.6, 0.4, 0.38}, 0.0, {{Facet::material, "wooden"}}),
      box(8, "monitor", {1.5, 2.0, 0.96}, {0.05, 0.25, 0.2}),
      box(9, "bed", {-2.0, 3.0, 0.3}, {1.0, 0.8, 0.3}),
  };
  std::vector<ObjectInstance> prev = curr;
  prev[0].obb.center = {0.0, 1.0, 0.45};
  prev.push_back(box(22, "storage", {2.0, -1.0, 0.4}, {0.3, 0.3, 0.4}));
  prev.push_back(box(23, "picture", {1.2, 2.1, 0.775}, {0.2, 0.15, 0.015}));
  ScanPair p;
  p.pair_id = "context_scene";
  p.prev = room_scan("context_prev", prev);
  p.curr = room_scan("context_curr", curr);
  p.changes.push_back({6, 6, ChangeKind::rigid, RigidMotion{0.0, {-0.4, -0.3071796769724491, 0.0}}, {}});
  p.changes.push_back({22, std::nullopt, ChangeKind::removed, std::nullopt, {}});
  p.changes.push_back({23, std::nullopt, ChangeKind::removed, std::nullopt, {}});
  return p;
}

ScanPair route_scene() {
  std::vector<ObjectInstance> curr = {
      box(3, "bed", {4.0, 2.0, 0.3}, {1.0, 0.8, 0.3}),
      box(4, "door", {0.05, 2.0, 1.0}, {0.05, 0.45, 1.0}),
      box(39, "chair", {1.6, 2.0, 0.45}, {0.25, 0.25, 0.45}, 0.0, {{Facet::color, "white"}}),
      box(40, "clothes dryer", {1.0, 3.5, 0.5}, {0.3, 0.2, 0.5}),
      box(41, "chair", {2.0, 0.4, 0.45}, {0.25, 0.25, 0.45}),
  };
  std::vector<ObjectInstance> prev = curr;
  prev[2].obb.center = {1.6, 0.4, 0.45};
  prev[4].obb.center = {3.2, 0.4, 0.45};
  ScanPair p;
  p.pair_id = "route_scene";
  p.prev = room_scan("route_prev", prev);
  p.curr = room_scan("route_curr", curr);
  p.changes.push_back({39, 39, ChangeKind::rigid, RigidMotion{0.0, {0.0, 1.6, 0.0}}, {}});
  p.changes.push_back({41, 41, ChangeKind::rigid, RigidMotion{0.0, {-1.2, 0.0, 0.0}}, {}});
  return p;
}

}  // namespace situ::testing
