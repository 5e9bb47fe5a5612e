#pragma once

#include <string>
#include <vector>

#include "situ/scene.hpp"

namespace situ::testing {

ObjectInstance box(ObjectId id, const std::string& label, Vec3 center, Vec3 half, double yaw = 0.0,
                   std::vector<Attribute> attrs = {});

// Adds `n` samples with normal `normal` spread over the box top.
void add_samples(ObjectInstance& obj, int n, Vec3 normal);

SceneScan room_scan(std::string id, std::vector<ObjectInstance> objects);

// Living room with a table, a sofa, a cup and three chairs: chair_11 is nearest the table,
// chair_12 the only blue one, chair_13 orange, chair_14 has nothing distinctive.
ScanPair feature_scene();

// Observer at the origin facing +y; chair_6 moved from (0, 1) to (-0.4, 0.6928), storage_22
// removed, picture_23 lying on table_7 in prev only, monitor_8 standing on table_7 in both.
ScanPair context_scene();

// Bedroom where chair_39 was pushed 1.6 m onto the route from the door to bed_3.
ScanPair route_scene();

}  // namespace situ::testing
