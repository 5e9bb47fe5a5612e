#pragma once

#include <optional>
#include <string>
#include <vector>

#include "situ/common.hpp"
#include "situ/scene.hpp"

namespace situ {

struct GeometryConfig {
  double arm_reach_m{0.75};
  double contact_gap_m{0.03};
  double overlap_frac{0.3};
  double lying_aspect{0.5};
  double dominant_frac{0.4};
  double corridor_width_m{0.6};
  double distance_round_m{0.1};
};

struct ObserverPose {
  Vec3 position;  // z holds the eye height above the floor
  double yaw{0.0};  // facing direction, radians counter-clockwise from +x
  double eye_height{1.57};
  double head_tilt{0.0};  // degrees

  Vec2 standing_point() const { return xy(position); }
  Vec2 facing() const { return {std::cos(yaw), std::sin(yaw)}; }
};

void check_pose(const ObserverPose& pose);

// 12 is straight ahead, hours increase clockwise.
struct ClockHour {
  int hour{12};

  explicit ClockHour(int h);
  friend bool operator==(const ClockHour&, const ClockHour&) = default;
};

struct EgoPosition {
  ClockHour hour{12};
  double distance{0.0};
};

// Clockwise angle in [0, 2*pi) from the observer's facing direction to `target`.
double clockwise_angle(Vec2 standing_point, double yaw, Vec2 target);
ClockHour hour_from_clockwise(double angle);

EgoPosition egocentric_position(const ObserverPose& observer, Vec3 target_center);
EgoPosition egocentric_position(const ObserverPose& observer, const ObjectInstance& target);

enum class Proximity { front, left, right, back };

Proximity proximity_bucket(ClockHour hour);
std::string to_string(Proximity p);

enum class VerticalKind { standing_on, lying_on, supported_by, hanging_on, attached_to };

std::string to_string(VerticalKind k);  // "standing on", ...
std::optional<VerticalKind> vertical_kind_from_string(const std::string& s);

struct VerticalRelation {
  ObjectId subject_id{0};
  ObjectId object_id{0};
  VerticalKind kind{VerticalKind::standing_on};
  friend bool operator==(const VerticalRelation&, const VerticalRelation&) = default;
};

// Relation of `a` (subject) to `b`, if any.
std::optional<VerticalRelation> vertical_relation(const ObjectInstance& a, const ObjectInstance& b,
                                                  const GeometryConfig& cfg = {});
// Every relation in the scan, ordered by (subject, object).
std::vector<VerticalRelation> vertical_relations(const SceneScan& scan,
                                                 const GeometryConfig& cfg = {});

struct DominantNormal {
  Vec3 direction;
  double coverage{0.0};
};

inline constexpr std::size_t kMinNormalSamples = 32;

// Throws Error when the object carries fewer than kMinNormalSamples samples.
std::optional<DominantNormal> dominant_normal(const ObjectInstance& obj,
                                              const GeometryConfig& cfg = {});

// Distance between the aligned prev center and the curr center of a rigid change.
double displacement(const ChangeRecord& change, const ScanPair& pair);

// Changed (rigid/added) objects whose curr footprint crosses the walking corridor from the
// observer to `target`, nearest first.
std::vector<ObjectId> route_obstacles(const ObserverPose& observer, const ObjectInstance& target,
                                      const ScanPair& pair, const GeometryConfig& cfg = {});

// --- planar helpers -------------------------------------------------------------------------------

using Polygon = std::vector<Vec2>;  // convex, counter-clockwise

Polygon footprint(const Obb& box);
double polygon_area(const Polygon& poly);
Polygon clip_convex(const Polygon& subject, const Polygon& clip);
bool convex_intersect(const Polygon& a, const Polygon& b);
bool point_in_convex(const Polygon& poly, Vec2 p);
double distance_to_convex(const Polygon& poly, Vec2 p);  // 0 inside
double convex_distance(const Polygon& a, const Polygon& b);  // 0 when touching/overlapping
Polygon corridor(Vec2 from, Vec2 to, double width);

// --- rendering ------------------------------------------------------------------------------------

double round_to(double value, double step);
// "1.6m" at the configured rounding step.
std::string format_meters(double meters, double step);
// "11 o'clock, 0.8m"
std::string format_location(const EgoPosition& pos, double step);

}  // namespace situ
