#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "situ/common.hpp"

namespace situ {

using ObjectId = int;

// Gravity-aligned box: yaw-only rotation about +z.
struct Obb {
  Vec3 center;
  Vec3 half_extents;
  double yaw{0.0};

  double bottom() const { return center.z - half_extents.z; }
  double top() const { return center.z + half_extents.z; }
};

enum class Facet { color, material, shape, size, state };

std::string to_string(Facet f);
std::optional<Facet> facet_from_string(const std::string& s);

struct Attribute {
  Facet facet;
  std::string value;
  friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

struct ObjectInstance {
  ObjectId id{0};
  std::string label;
  Obb obb;
  std::vector<Attribute> attributes;
  std::vector<SurfaceSample> samples;

  // "chair_39" style key used in payloads.
  std::string key() const { return label + "_" + std::to_string(id); }
  std::vector<std::string> facet_values(Facet f) const;
};

// Walkable floor occupancy grid. Row r covers y in [origin.y + r*cell, origin.y + (r+1)*cell),
// column c covers x likewise; '1' marks a standable cell, '0' a blocked one.
struct StandableGrid {
  Vec2 origin;
  double cell_size{0.25};
  std::vector<std::string> rows;

  bool empty() const { return rows.empty(); }
  bool standable_at(Vec2 p) const;
  Vec2 cell_center(std::size_t row, std::size_t col) const;
  std::size_t standable_count() const;
};

struct SceneScan {
  std::string scan_id;
  std::vector<ObjectInstance> objects;
  double floor_height{0.0};
  std::optional<StandableGrid> standable;
  std::vector<ObjectId> walls;

  const ObjectInstance* find(ObjectId id) const;
  const ObjectInstance& at(ObjectId id) const;
  std::size_t count_label(const std::string& label) const;
};

enum class ChangeKind { rigid, removed, added, nonrigid };

std::string to_string(ChangeKind k);
std::optional<ChangeKind> change_kind_from_string(const std::string& s);

// Rigid motion of a changed object, expressed in curr coordinates: the aligned prev center is
// translated by `translation` and the box turns by `yaw` about its own vertical axis.
struct RigidMotion {
  double yaw{0.0};
  Vec3 translation;
};

struct HumanFields {
  std::string reason;
  std::string warning;
  std::string description;
  std::string rearrangement;
};

struct ChangeRecord {
  std::optional<ObjectId> object_id_prev;
  std::optional<ObjectId> object_id_curr;
  ChangeKind kind{ChangeKind::rigid};
  std::optional<RigidMotion> rigid_transform;
  std::optional<HumanFields> human_fields;

  // Whichever id is present, preferring curr.
  ObjectId any_id() const { return object_id_curr ? *object_id_curr : *object_id_prev; }
};

// Maps prev coordinates into curr coordinates: p_curr = Rz(yaw) * p_prev + t.
struct Alignment {
  double yaw{0.0};
  Vec3 t;

  Vec3 apply(Vec3 p) const;
  Obb apply(const Obb& box) const;
  Alignment inverse() const;
};

struct ScanPair {
  std::string pair_id;
  SceneScan prev;
  SceneScan curr;
  Alignment alignment;
  std::vector<ChangeRecord> changes;

  const ChangeRecord* change_for(ObjectId id) const;
  // Prev box of `id` mapped into curr coordinates.
  std::optional<Obb> aligned_prev_obb(ObjectId id) const;
};

// --- validation -------------------------------------------------------------------------------

struct Finding {
  std::string code;  // DUP_ID, DANGLING_CHANGE, ...
  std::string detail;
  std::optional<ObjectId> id;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const { return findings.empty(); }
  bool has(const std::string& code) const;
};

ValidationReport validate_scan(const SceneScan& scan);
ValidationReport validate_pair(const ScanPair& pair);

// --- interchange --------------------------------------------------------------------------------

// Loads a pair manifest plus the scans it references; throws ParseError / ValidationError.
ScanPair load_scan_pair(const std::filesystem::path& manifest);
// Loads every manifest named (one {"manifest": path} object per line) by a split index file.
std::vector<ScanPair> load_split(const std::filesystem::path& index);

std::string scan_to_json(const SceneScan& scan);
SceneScan scan_from_json(const std::string& text);
// Manifest text for `pair`, referencing scan files by the given relative names.
std::string manifest_to_json(const ScanPair& pair, const std::string& prev_name,
                             const std::string& curr_name);

// Writes <dir>/<pair_id>.manifest.json and the two scan files next to it. Returns the manifest.
std::filesystem::path write_scan_pair(const ScanPair& pair, const std::filesystem::path& dir);

// Copies {reason, warning, description, rearrangement} keyed by "label_id" onto matching
// change records. Returns the number of records updated; unknown keys raise ValidationError.
std::size_t import_human_annotations(ScanPair& pair, const std::filesystem::path& file);

// --- fixtures -------------------------------------------------------------------------------------

struct FixtureSpec {
  int n_objects{8};
  int n_changes{2};
  Vec3 room_extents{5.0, 4.0, 2.6};
};

class InfeasibleFixture : public Error {
 public:
  using Error::Error;
};

// Deterministic desk-scale scan pair generator.
ScanPair make_fixture(unsigned seed, const FixtureSpec& spec, const std::string& pair_id = "");

// Objects that block walking: anything but floor/ceiling whose bottom is below 1 m.
bool blocks_floor(const ObjectInstance& obj, double floor_height);

// Standability grid over the bounding box of `room` (convex, counter-clockwise): a cell is
// standable when its center lies inside the room and at least `clearance` away from every
// floor-blocking footprint.
StandableGrid compute_standable(const std::vector<ObjectInstance>& objects, double floor_height,
                                const std::vector<Vec2>& room, double cell_size,
                                double clearance = 0.15);

bool is_structural(const std::string& label);

}  // namespace situ
