#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/config.hpp"
#include "situ/geometry.hpp"
#include "situ/scene.hpp"

namespace situ {

enum class SituationCategory { sitting, standing, interacting };

std::string to_string(SituationCategory c);
SituationCategory situation_category_from_string(const std::string& s);

struct Situation {
  std::string situation_id;
  SituationCategory category{SituationCategory::standing};
  ObjectId anchor_id{0};
  ObserverPose pose;
  std::string brief_text;
  std::optional<std::string> descriptive_text;
  std::vector<ObjectId> reference_ids;
};

class NoEligibleAnchor : public Error {
 public:
  using Error::Error;
};

class NoStandableFloor : public Error {
 public:
  using Error::Error;
};

class ClearanceUnsatisfiable : public Error {
 public:
  using Error::Error;
};

struct EyePose {
  double eye_height_cm{0.0};
  double head_tilt_deg{0.0};
};

EyePose sample_eye_pose(SituationCategory category, std::uint64_t seed);

enum class SeatGroup { large_back, small_back, large_noback, small_noback };
std::optional<SeatGroup> seat_group(const std::string& label, const SeatGroups& groups);

// Horizontal direction a person sitting on `seat` faces, if a backrest or nearby wall decides it.
std::optional<Vec2> seat_facing(const SceneScan& scan, const ObjectInstance& seat,
                                const SamplerConfig& cfg = {});

// Anchors listed in `taken` are skipped for sitting and interacting.
Situation sample_situation(const SceneScan& scan, SituationCategory category, std::uint64_t seed,
                           const SamplerConfig& cfg = {}, const GeometryConfig& geo = {},
                           const std::set<ObjectId>& taken = {});

// Per-pair batch using the configured per-category counts. Categories whose anchors run out
// simply yield fewer situations.
std::vector<Situation> sample_situations(const ScanPair& pair, std::uint64_t seed,
                                         const SamplerConfig& cfg = {},
                                         const GeometryConfig& geo = {});

// Object map fed to the descriptive-situation prompt: {"sofa_22": {"attributes": [...],
// "location": "front, within arm reach"}, ...}.
nlohmann::ordered_json build_situation_payload(const SceneScan& scan, const Situation& situation,
                                               const SamplerConfig& cfg = {},
                                               const GeometryConfig& geo = {});

nlohmann::ordered_json situation_to_json(const Situation& s, const std::string& pair_id);
Situation situation_from_json(const nlohmann::json& j);

// Mixes a base seed with a label and an index into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, const std::string& label, std::uint64_t index);

}  // namespace situ
