#include "situ/scene.hpp"

#include <algorithm>
#include <set>

#include "json_util.hpp"
#include "situ/geometry.hpp"

namespace situ {

using detail::json;
using detail::ojson;

std::string to_string(Facet f) {
  switch (f) {
    case Facet::color: return "color";
    case Facet::material: return "material";
    case Facet::shape: return "shape";
    case Facet::size: return "size";
    case Facet::state: return "state";
  }
  return "color";
}

std::optional<Facet> facet_from_string(const std::string& s) {
  for (auto f : {Facet::color, Facet::material, Facet::shape, Facet::size, Facet::state}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::vector<std::string> ObjectInstance::facet_values(Facet f) const {
  std::vector<std::string> out;
  for (const auto& a : attributes) {
    if (a.facet == f) out.push_back(a.value);
  }
  return out;
}

bool StandableGrid::standable_at(Vec2 p) const {
  const double fr = std::floor((p.y - origin.y) / cell_size);
  const double fc = std::floor((p.x - origin.x) / cell_size);
  if (fr < 0 || fc < 0 || fr >= static_cast<double>(rows.size())) return false;
  const auto& row = rows[static_cast<std::size_t>(fr)];
  if (fc >= static_cast<double>(row.size())) return false;
  return row[static_cast<std::size_t>(fc)] == '1';
}

Vec2 StandableGrid::cell_center(std::size_t row, std::size_t col) const {
  return {origin.x + (static_cast<double>(col) + 0.5) * cell_size,
          origin.y + (static_cast<double>(row) + 0.5) * cell_size};
}

std::size_t StandableGrid::standable_count() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += static_cast<std::size_t>(std::count(r.begin(), r.end(), '1'));
  return n;
}

const ObjectInstance* SceneScan::find(ObjectId id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

const ObjectInstance& SceneScan::at(ObjectId id) const {
  if (const auto* o = find(id)) return *o;
  throw Error("scan " + scan_id + " has no object " + std::to_string(id));
}

std::size_t SceneScan::count_label(const std::string& label) const {
  return static_cast<std::size_t>(std::count_if(
      objects.begin(), objects.end(), [&](const auto& o) { return o.label == label; }));
}

std::string to_string(ChangeKind k) {
  switch (k) {
    case ChangeKind::rigid: return "rigid";
    case ChangeKind::removed: return "removed";
    case ChangeKind::added: return "added";
    case ChangeKind::nonrigid: return "nonrigid";
  }
  return "rigid";
}

std::optional<ChangeKind> change_kind_from_string(const std::string& s) {
  for (auto k : {ChangeKind::rigid, ChangeKind::removed, ChangeKind::added, ChangeKind::nonrigid}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

Vec3 Alignment::apply(Vec3 p) const {
  const Vec2 r = rotate(xy(p), yaw);
  return {r.x + t.x, r.y + t.y, p.z + t.z};
}

Obb Alignment::apply(const Obb& box) const {
  return {apply(box.center), box.half_extents, wrap_pi(box.yaw + yaw)};
}

Alignment Alignment::inverse() const {
  const Vec2 r = rotate({-t.x, -t.y}, -yaw);
  return {-yaw, {r.x, r.y, -t.z}};
}

const ChangeRecord* ScanPair::change_for(ObjectId id) const {
  for (const auto& c : changes) {
    if (c.object_id_prev == id || c.object_id_curr == id) return &c;
  }
  return nullptr;
}

std::optional<Obb> ScanPair::aligned_prev_obb(ObjectId id) const {
  const auto* o = prev.find(id);
  if (o == nullptr) return std::nullopt;
  return alignment.apply(o->obb);
}

bool is_structural(const std::string& label) {
  return label == "wall" || label == "floor" || label == "ceiling";
}

bool blocks_floor(const ObjectInstance& obj, double floor_height) {
  if (obj.label == "floor" || obj.label == "ceiling") return false;
  return obj.obb.bottom() < floor_height + 1.0;
}

// --- validation -------------------------------------------------------------------------------

bool ValidationReport::has(const std::string& code) const {
  return std::any_of(findings.begin(), findings.end(), [&](const auto& f) { return f.code == code; });
}

ValidationReport validate_scan(const SceneScan& scan) {
  ValidationReport rep;
  auto add = [&](std::string code, std::string detail, std::optional<ObjectId> id) {
    rep.findings.push_back({std::move(code), scan.scan_id + ": " + std::move(detail), id});
  };
  std::set<ObjectId> seen;
  for (const auto& o : scan.objects) {
    if (o.id <= 0) add("BAD_ID", "object id must be positive", o.id);
    if (!seen.insert(o.id).second) add("DUP_ID", "duplicate object id " + std::to_string(o.id), o.id);
    const Vec3& h = o.obb.half_extents;
    if (!(h.x > 0.0 && h.y > 0.0 && h.z > 0.0)) {
      add("BAD_EXTENT", "half extents must be positive on " + o.key(), o.id);
    }
    for (const auto& s : o.samples) {
      if (std::abs(s.normal.norm() - 1.0) > 1e-6) {
        add("BAD_NORMAL", "non-unit sample normal on " + o.key(), o.id);
        break;
      }
    }
  }
  for (ObjectId w : scan.walls) {
    const auto* o = scan.find(w);
    if (o == nullptr || o->label != "wall") {
      add("BAD_WALL", "wall id " + std::to_string(w) + " is not an object labeled wall", w);
    }
  }
  if (scan.standable) {
    const auto& grid = *scan.standable;
    if (!(grid.cell_size > 0.0)) add("BAD_GRID", "standable cell_size must be positive", std::nullopt);
    std::vector<std::pair<ObjectId, Polygon>> blockers;
    for (const auto& o : scan.objects) {
      if (blocks_floor(o, scan.floor_height)) blockers.emplace_back(o.id, footprint(o.obb));
    }
    for (std::size_t r = 0; r < grid.rows.size() && grid.cell_size > 0.0; ++r) {
      for (std::size_t c = 0; c < grid.rows[r].size(); ++c) {
        const char ch = grid.rows[r][c];
        if (ch != '0' && ch != '1') {
          add("BAD_GRID", "standable rows may only hold '0'/'1'", std::nullopt);
          return rep;
        }
        if (ch != '1') continue;
        const Vec2 p = grid.cell_center(r, c);
        for (const auto& [id, poly] : blockers) {
          if (point_in_convex(poly, p)) {
            add("STANDABLE_OCCUPIED",
                "standable cell (" + std::to_string(r) + "," + std::to_string(c) +
                    ") lies inside object " + std::to_string(id),
                id);
            break;
          }
        }
      }
    }
  }
  return rep;
}

ValidationReport validate_pair(const ScanPair& pair) {
  ValidationReport rep = validate_scan(pair.prev);
  auto curr = validate_scan(pair.curr);
  rep.findings.insert(rep.findings.end(), curr.findings.begin(), curr.findings.end());
  auto add = [&](std::string code, std::string detail, std::optional<ObjectId> id) {
    rep.findings.push_back({std::move(code), pair.pair_id + ": " + std::move(detail), id});
  };

  std::set<ObjectId> named_prev, named_curr;
  for (const auto& ch : pair.changes) {
    const std::string kind = to_string(ch.kind);
    const bool has_prev = ch.object_id_prev.has_value();
    const bool has_curr = ch.object_id_curr.has_value();
    if (!has_prev && !has_curr) {
      add("BAD_CHANGE_IDS", kind + " change names no object", std::nullopt);
      continue;
    }
    const ObjectId id = ch.any_id();
    bool ids_ok = true;
    switch (ch.kind) {
      case ChangeKind::removed: ids_ok = has_prev && !has_curr; break;
      case ChangeKind::added: ids_ok = has_curr && !has_prev; break;
      case ChangeKind::rigid:
      case ChangeKind::nonrigid: ids_ok = has_prev && has_curr; break;
    }
    if (!ids_ok) add("BAD_CHANGE_IDS", kind + " change has inconsistent object ids", id);
    if (ch.kind == ChangeKind::rigid && !ch.rigid_transform) {
      add("MISSING_TRANSFORM", "rigid change missing transform", id);
    }
    if (has_prev) {
      if (pair.prev.find(*ch.object_id_prev) == nullptr) {
        add("DANGLING_CHANGE", "change references absent prev id " +
                                   std::to_string(*ch.object_id_prev), *ch.object_id_prev);
      }
      if (!named_prev.insert(*ch.object_id_prev).second) {
        add("DUP_CHANGE", "prev id named by several changes", *ch.object_id_prev);
      }
    }
    if (has_curr) {
      if (pair.curr.find(*ch.object_id_curr) == nullptr) {
        add("DANGLING_CHANGE", "change references absent curr id " +
                                   std::to_string(*ch.object_id_curr), *ch.object_id_curr);
      }
      if (!named_curr.insert(*ch.object_id_curr).second) {
        add("DUP_CHANGE", "curr id named by several changes", *ch.object_id_curr);
      }
    }
    if (ch.kind == ChangeKind::removed && has_prev && pair.curr.find(*ch.object_id_prev)) {
      add("BAD_CHANGE_IDS", "removed object still present in curr", id);
    }
    if (ch.kind == ChangeKind::added && has_curr && pair.prev.find(*ch.object_id_curr)) {
      add("BAD_CHANGE_IDS", "added object already present in prev", id);
    }
  }
  // Objects not named by any change must exist on both sides (unchanged under alignment).
  for (const auto& o : pair.prev.objects) {
    if (!named_prev.count(o.id) && pair.curr.find(o.id) == nullptr) {
      add("MISSING_COUNTERPART", "prev object " + o.key() + " vanished without a removed record",
          o.id);
    }
  }
  for (const auto& o : pair.curr.objects) {
    if (!named_curr.count(o.id) && pair.prev.find(o.id) == nullptr) {
      add("MISSING_COUNTERPART", "curr object " + o.key() + " appeared without an added record",
          o.id);
    }
  }
  return rep;
}

// --- interchange --------------------------------------------------------------------------------

namespace {

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) {
    throw ValidationError(where + ": missing field '" + name + "'");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + name + "' has the wrong type");
  }
}

Vec3 vec3_field(const json& j, const char* name, const std::string& where) {
  if (!j.contains(name)) throw ValidationError(where + ": missing field '" + name + "'");
  try {
    return detail::vec3_from(j.at(name));
  } catch (const std::exception&) {
    throw ValidationError(where + ": field '" + name + "' must be [x, y, z]");
  }
}

ObjectInstance object_from_json(const json& j, const std::string& scan_id) {
  ObjectInstance o;
  o.id = field<int>(j, "id", scan_id + " object");
  const std::string where = scan_id + " object " + std::to_string(o.id);
  o.label = field<std::string>(j, "label", where);
  const json& box = j.contains("obb") ? j.at("obb") : throw ValidationError(where + ": missing obb");
  o.obb.center = vec3_field(box, "center", where + " obb");
  o.obb.half_extents = vec3_field(box, "half_extents", where + " obb");
  o.obb.yaw = field<double>(box, "yaw", where + " obb");
  if (j.contains("attributes")) {
    for (const auto& [facet_name, values] : j.at("attributes").items()) {
      const auto facet = facet_from_string(facet_name);
      if (!facet) throw ValidationError(where + ": unknown attribute facet '" + facet_name + "'");
      for (const auto& v : values) o.attributes.push_back({*facet, v.get<std::string>()});
    }
  }
  if (j.contains("samples")) {
    for (const auto& s : j.at("samples")) {
      if (!s.is_array() || s.size() != 6) {
        throw ValidationError(where + ": samples are [px, py, pz, nx, ny, nz]");
      }
      o.samples.push_back({{s[0].get<double>(), s[1].get<double>(), s[2].get<double>()},
                           {s[3].get<double>(), s[4].get<double>(), s[5].get<double>()}});
    }
  }
  return o;
}

ojson object_to_json(const ObjectInstance& o) {
  ojson j;
  j["id"] = o.id;
  j["label"] = o.label;
  j["obb"] = {{"center", detail::vec3_to(o.obb.center)},
              {"half_extents", detail::vec3_to(o.obb.half_extents)},
              {"yaw", o.obb.yaw}};
  if (!o.attributes.empty()) {
    ojson attrs = ojson::object();
    for (auto f : {Facet::color, Facet::material, Facet::shape, Facet::size, Facet::state}) {
      auto vals = o.facet_values(f);
      if (!vals.empty()) attrs[to_string(f)] = vals;
    }
    j["attributes"] = attrs;
  }
  if (!o.samples.empty()) {
    ojson samples = ojson::array();
    for (const auto& s : o.samples) {
      samples.push_back({s.point.x, s.point.y, s.point.z, s.normal.x, s.normal.y, s.normal.z});
    }
    j["samples"] = samples;
  }
  return j;
}

ChangeRecord change_from_json(const json& j, std::size_t index) {
  const std::string where = "change #" + std::to_string(index);
  ChangeRecord c;
  const auto kind_name = field<std::string>(j, "kind", where);
  const auto kind = change_kind_from_string(kind_name);
  if (!kind) throw ValidationError(where + ": unknown change kind '" + kind_name + "'");
  c.kind = *kind;
  if (j.contains("object_id_prev") && !j.at("object_id_prev").is_null()) {
    c.object_id_prev = field<int>(j, "object_id_prev", where);
  }
  if (j.contains("object_id_curr") && !j.at("object_id_curr").is_null()) {
    c.object_id_curr = field<int>(j, "object_id_curr", where);
  }
  if (j.contains("rigid_transform") && !j.at("rigid_transform").is_null()) {
    const auto& t = j.at("rigid_transform");
    c.rigid_transform = RigidMotion{field<double>(t, "yaw", where + " rigid_transform"),
                                    vec3_field(t, "t", where + " rigid_transform")};
  }
  if (j.contains("human_fields") && !j.at("human_fields").is_null()) {
    const auto& h = j.at("human_fields");
    HumanFields hf;
    hf.reason = h.value("reason", "");
    hf.warning = h.value("warning", "");
    hf.description = h.value("description", "");
    hf.rearrangement = h.value("rearrangement", "");
    c.human_fields = hf;
  }
  return c;
}

ojson change_to_json(const ChangeRecord& c) {
  ojson j;
  j["kind"] = to_string(c.kind);
  if (c.object_id_prev) j["object_id_prev"] = *c.object_id_prev;
  if (c.object_id_curr) j["object_id_curr"] = *c.object_id_curr;
  if (c.rigid_transform) {
    j["rigid_transform"] = {{"yaw", c.rigid_transform->yaw},
                            {"t", detail::vec3_to(c.rigid_transform->translation)}};
  }
  if (c.human_fields) {
    j["human_fields"] = {{"reason", c.human_fields->reason},
                         {"warning", c.human_fields->warning},
                         {"description", c.human_fields->description},
                         {"rearrangement", c.human_fields->rearrangement}};
  }
  return j;
}

SceneScan scan_from_parsed(const json& j, const std::string& where) {
  SceneScan s;
  s.scan_id = field<std::string>(j, "scan_id", where);
  s.floor_height = field<double>(j, "floor_height", where);
  if (!j.contains("objects") || !j.at("objects").is_array()) {
    throw ValidationError(where + ": missing objects array");
  }
  for (const auto& o : j.at("objects")) s.objects.push_back(object_from_json(o, s.scan_id));
  if (j.contains("standable") && !j.at("standable").is_null()) {
    const auto& g = j.at("standable");
    StandableGrid grid;
    const auto origin = field<std::vector<double>>(g, "origin", where + " standable");
    if (origin.size() != 2) throw ValidationError(where + ": standable origin must be [x, y]");
    grid.origin = {origin[0], origin[1]};
    grid.cell_size = field<double>(g, "cell_size", where + " standable");
    grid.rows = field<std::vector<std::string>>(g, "rows", where + " standable");
    s.standable = std::move(grid);
  }
  if (j.contains("walls")) {
    s.walls = field<std::vector<int>>(j, "walls", where);
  } else {
    for (const auto& o : s.objects) {
      if (o.label == "wall") s.walls.push_back(o.id);
    }
  }
  return s;
}

void throw_on_findings(const ValidationReport& rep) {
  if (rep.ok()) return;
  const auto& f = rep.findings.front();
  throw ValidationError(f.code + ": " + f.detail);
}

}  // namespace

std::string scan_to_json(const SceneScan& scan) {
  ojson j;
  j["scan_id"] = scan.scan_id;
  j["floor_height"] = scan.floor_height;
  if (scan.standable) {
    j["standable"] = {{"origin", {scan.standable->origin.x, scan.standable->origin.y}},
                      {"cell_size", scan.standable->cell_size},
                      {"rows", scan.standable->rows}};
  }
  j["walls"] = scan.walls;
  ojson objs = ojson::array();
  for (const auto& o : scan.objects) objs.push_back(object_to_json(o));
  j["objects"] = objs;
  return j.dump(1) + "\n";
}

SceneScan scan_from_json(const std::string& text) {
  return scan_from_parsed(detail::parse_json(text, "scan"), "scan");
}

std::string manifest_to_json(const ScanPair& pair, const std::string& prev_name,
                             const std::string& curr_name) {
  ojson j;
  j["pair_id"] = pair.pair_id;
  j["prev_scan"] = prev_name;
  j["curr_scan"] = curr_name;
  j["alignment"] = {{"yaw", pair.alignment.yaw}, {"t", detail::vec3_to(pair.alignment.t)}};
  ojson changes = ojson::array();
  for (const auto& c : pair.changes) changes.push_back(change_to_json(c));
  j["changes"] = changes;
  return j.dump(1) + "\n";
}

ScanPair load_scan_pair(const std::filesystem::path& manifest) {
  const std::string where = manifest.filename().string();
  const json j = detail::parse_json(detail::read_file(manifest), where);
  ScanPair pair;
  if (j.contains("pair_id")) {
    pair.pair_id = field<std::string>(j, "pair_id", where);
  } else {
    pair.pair_id = manifest.stem().string();
    if (auto pos = pair.pair_id.find(".manifest"); pos != std::string::npos) {
      pair.pair_id.resize(pos);
    }
  }
  const auto dir = manifest.parent_path();
  const auto prev_path = dir / field<std::string>(j, "prev_scan", where);
  const auto curr_path = dir / field<std::string>(j, "curr_scan", where);
  pair.prev = scan_from_parsed(
      detail::parse_json(detail::read_file(prev_path), prev_path.filename().string()),
      prev_path.filename().string());
  pair.curr = scan_from_parsed(
      detail::parse_json(detail::read_file(curr_path), curr_path.filename().string()),
      curr_path.filename().string());
  if (!j.contains("alignment")) throw ValidationError(where + ": missing field 'alignment'");
  pair.alignment.yaw = field<double>(j.at("alignment"), "yaw", where + " alignment");
  pair.alignment.t = vec3_field(j.at("alignment"), "t", where + " alignment");
  if (!j.contains("changes") || !j.at("changes").is_array()) {
    throw ValidationError(where + ": missing changes array");
  }
  std::size_t i = 0;
  for (const auto& c : j.at("changes")) pair.changes.push_back(change_from_json(c, i++));
  throw_on_findings(validate_pair(pair));
  if (j.contains("human_annotations")) {
    import_human_annotations(pair, dir / field<std::string>(j, "human_annotations", where));
  }
  return pair;
}

std::vector<ScanPair> load_split(const std::filesystem::path& index) {
  std::istringstream lines(detail::read_file(index));
  std::vector<ScanPair> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(lines, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(index.filename().string() + ": " + e.what(), line_start + e.byte);
    }
    out.push_back(load_scan_pair(index.parent_path() /
                                 field<std::string>(j, "manifest", index.filename().string())));
  }
  return out;
}

std::filesystem::path write_scan_pair(const ScanPair& pair, const std::filesystem::path& dir) {
  const std::string prev_name = pair.pair_id + ".prev.json";
  const std::string curr_name = pair.pair_id + ".curr.json";
  detail::write_file_atomic(dir / prev_name, scan_to_json(pair.prev));
  detail::write_file_atomic(dir / curr_name, scan_to_json(pair.curr));
  const auto manifest = dir / (pair.pair_id + ".manifest.json");
  detail::write_file_atomic(manifest, manifest_to_json(pair, prev_name, curr_name));
  return manifest;
}

std::size_t import_human_annotations(ScanPair& pair, const std::filesystem::path& file) {
  const json j = detail::parse_json(detail::read_file(file), file.filename().string());
  if (!j.is_object()) throw ValidationError(file.filename().string() + ": expected an object");
  std::size_t updated = 0;
  for (const auto& [key, value] : j.items()) {
    const auto us = key.rfind('_');
    if (us == std::string::npos) throw ValidationError("annotation key '" + key + "' lacks _id");
    const std::string label = key.substr(0, us);
    int id = 0;
    try {
      id = std::stoi(key.substr(us + 1));
    } catch (const std::exception&) {
      throw ValidationError("annotation key '" + key + "' has a non-numeric id");
    }
    ChangeRecord* target = nullptr;
    for (auto& c : pair.changes) {
      if (c.object_id_prev == id || c.object_id_curr == id) target = &c;
    }
    if (target == nullptr) {
      throw ValidationError("annotation '" + key + "' does not match any change record");
    }
    const auto* obj = pair.curr.find(id) ? pair.curr.find(id) : pair.prev.find(id);
    if (obj == nullptr || obj->label != label) {
      throw ValidationError("annotation '" + key + "' label does not match the object");
    }
    HumanFields hf;
    hf.reason = value.value("reason", "");
    hf.warning = value.value("warning", "");
    hf.description = value.value("description", "");
    hf.rearrangement = value.value("rearrangement", "");
    target->human_fields = hf;
    ++updated;
  }
  return updated;
}

StandableGrid compute_standable(const std::vector<ObjectInstance>& objects, double floor_height,
                                const std::vector<Vec2>& room, double cell_size,
                                double clearance) {
  Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
  for (const auto& p : room) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  StandableGrid grid;
  grid.origin = lo;
  grid.cell_size = cell_size;
  const auto n_rows = static_cast<std::size_t>(std::ceil((hi.y - lo.y) / cell_size));
  const auto n_cols = static_cast<std::size_t>(std::ceil((hi.x - lo.x) / cell_size));
  std::vector<Polygon> blockers;
  for (const auto& o : objects) {
    if (blocks_floor(o, floor_height)) blockers.push_back(footprint(o.obb));
  }
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::string row(n_cols, '0');
    for (std::size_t c = 0; c < n_cols; ++c) {
      const Vec2 p = grid.cell_center(r, c);
      if (!point_in_convex(room, p)) continue;
      bool free = true;
      for (const auto& poly : blockers) {
        if (distance_to_convex(poly, p) < clearance) {
          free = false;
          break;
        }
      }
      if (free) row[c] = '1';
    }
    grid.rows.push_back(std::move(row));
  }
  return grid;
}

}  // namespace situ
