#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "situ/config.hpp"
#include "situ/geometry.hpp"
#include "situ/review.hpp"
#include "situ/scene.hpp"

namespace situ {

enum class FeatureKind {
  landmark_self,
  distinctive_color,
  extremity_nearest,
  extremity_farthest,
  vertical_to_landmark,
  manual,
};

std::string to_string(FeatureKind k);
FeatureKind feature_kind_from_string(const std::string& s);

enum class Tense { past, present };

std::string to_string(Tense t);
Tense tense_from_string(const std::string& s);

struct FeatureCandidate {
  ObjectId object_id{0};
  FeatureKind kind{FeatureKind::landmark_self};
  std::optional<ObjectId> landmark_id;
  std::string text_fragment;  // "blue", "nearest to the table", "has a monitor on it", ...
  Tense tense{Tense::present};
  // Vertical candidates only: relation kind and whether the object is the subject.
  std::optional<VerticalKind> relation;
  bool object_is_subject{true};

  // Stable identifier "kind:arg:tense", used by review decisions.
  std::string feature_id() const;
};

struct NeedsReview {
  ObjectId object_id{0};
};

using Resolution = std::variant<FeatureCandidate, NeedsReview>;

std::set<ObjectId> find_landmarks(const SceneScan& scan, const QueryConfig& cfg = {});

// Every feature that singles out `object_id` among its same-label instances in `scan`, tagged
// with `tense`.
std::vector<FeatureCandidate> candidate_features(ObjectId object_id, const SceneScan& scan,
                                                 const std::set<ObjectId>& landmarks, Tense tense,
                                                 const GeometryConfig& geo = {});

// Present-tense candidates from curr followed by past-tense ones from prev, for a changed object.
std::vector<FeatureCandidate> candidate_features(const ScanPair& pair, ObjectId object_id,
                                                 const QueryConfig& cfg = {},
                                                 const GeometryConfig& geo = {});

// Brute-force check that the candidate's predicate holds for exactly one same-label object.
bool verify_unique(const FeatureCandidate& c, const SceneScan& scan, const GeometryConfig& geo = {});

Resolution resolve_feature(ObjectId object_id, const std::vector<FeatureCandidate>& candidates,
                           const ObjectReview* review);

enum class QueryTask { description, rearrangement };
std::string to_string(QueryTask t);

inline constexpr int kQueryVariants = 3;

// `same_label_count` picks comparative (2) or superlative (>2) wording for extremities.
std::string render_query(const std::string& label, const FeatureCandidate& feature,
                         std::size_t same_label_count, QueryTask task, int variant = 0);

// Variant chosen by hashing the pair, object, feature and task.
int query_variant(const std::string& pair_id, ObjectId object_id, const std::string& feature_id,
                  QueryTask task);

std::string review_task_id(const std::string& pair_id, ObjectId object_id);

}  // namespace situ
