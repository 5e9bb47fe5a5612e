#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/config.hpp"
#include "situ/geometry.hpp"
#include "situ/sampler.hpp"
#include "situ/scene.hpp"

namespace situ {

struct ChangeGroups {
  std::vector<ObjectId> removed;
  std::vector<ObjectId> added;
  std::vector<ObjectId> rigid;
  std::vector<ObjectId> non_rigid;
  std::vector<ObjectId> unchanged;
};

// Partition of every prev/curr id, each group sorted ascending.
ChangeGroups classify_changes(const ScanPair& pair);

enum class ContextGroup { removed, added, rigid, non_rigid, unchanged };
std::string to_string(ContextGroup g);

struct ContextEntry {
  ObjectId id{0};
  std::string key;  // "chair_6"
  std::string label;
  ContextGroup group{ContextGroup::unchanged};
  std::vector<Attribute> attributes;
  std::optional<EgoPosition> location;
  std::optional<EgoPosition> location_old;
  std::optional<EgoPosition> return_vec;
  std::optional<double> move_distance;
  std::vector<VerticalRelation> allocentric;
  std::optional<std::vector<VerticalRelation>> allocentric_old;  // set when it differs from allocentric
  std::vector<ObjectId> warning;  // unchanged targets whose route this object now blocks
  std::optional<std::string> caption;
  std::optional<std::string> instruction;
};

struct ContextRecord {
  std::string pair_id;
  std::string situation_id;
  std::string brief_text;
  std::vector<ContextEntry> entries;  // grouped in ContextGroup order, ids ascending

  const ContextEntry* find(ObjectId id) const;
};

// Motion that puts a rigidly moved object back: clock direction taken with the observer's yaw at
// the object's curr center, 3D distance to its aligned prev center.
EgoPosition return_vector(const ChangeRecord& change, const Situation& situation,
                          const ScanPair& pair);

// Unchanged objects with a scene-unique, non-structural label.
std::vector<ObjectId> warning_targets(const ScanPair& pair);

ContextRecord build_context(const ScanPair& pair, const Situation& situation,
                            const GeometryConfig& geo = {});

enum class ContextShape {
  longform,  // Caption/Instruction text, attributes as one list
  qa,        // attributes split by facet, no human text
};

// Data payload keyed by group then "label_id"; empty groups are left out.
nlohmann::ordered_json context_payload(const ContextRecord& ctx, const ScanPair& pair,
                                       ContextShape shape, const GeometryConfig& geo = {});

// "two steps", "one and a half steps", "half a step".
std::string steps_phrase(double meters, double step_m);

struct LongFormText {
  std::string description;
  std::optional<std::string> rearrangement;
};

// Offline stand-in for the long-form generation prompt, built from one context entry.
LongFormText template_longform(const ContextEntry& entry, const GeometryConfig& geo = {},
                               const ContextConfig& cfg = {});

}  // namespace situ
