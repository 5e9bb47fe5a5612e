#include "situ/context.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace situ {

using nlohmann::ordered_json;

std::string to_string(ContextGroup g) {
  switch (g) {
    case ContextGroup::removed: return "removed";
    case ContextGroup::added: return "added";
    case ContextGroup::rigid: return "rigid";
    case ContextGroup::non_rigid: return "non_rigid";
    case ContextGroup::unchanged: return "unchanged";
  }
  return "unchanged";
}

ChangeGroups classify_changes(const ScanPair& pair) {
  ChangeGroups g;
  std::set<ObjectId> named;
  for (const auto& ch : pair.changes) {
    const ObjectId id = ch.any_id();
    named.insert(id);
    switch (ch.kind) {
      case ChangeKind::removed: g.removed.push_back(id); break;
      case ChangeKind::added: g.added.push_back(id); break;
      case ChangeKind::rigid: g.rigid.push_back(id); break;
      case ChangeKind::nonrigid: g.non_rigid.push_back(id); break;
    }
  }
  std::set<ObjectId> rest;
  for (const auto* scan : {&pair.prev, &pair.curr}) {
    for (const auto& o : scan->objects) {
      if (!named.count(o.id)) rest.insert(o.id);
    }
  }
  g.unchanged.assign(rest.begin(), rest.end());
  for (auto* v : {&g.removed, &g.added, &g.rigid, &g.non_rigid}) std::sort(v->begin(), v->end());
  return g;
}

const ContextEntry* ContextRecord::find(ObjectId id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

EgoPosition return_vector(const ChangeRecord& change, const Situation& situation,
                          const ScanPair& pair) {
  if (change.kind != ChangeKind::rigid) {
    throw Error("return_vector needs a rigid change, got " + to_string(change.kind));
  }
  const auto prev = pair.aligned_prev_obb(*change.object_id_prev);
  const auto* curr = pair.curr.find(*change.object_id_curr);
  if (!prev || !curr) throw Error("rigid change references an unknown object");
  const Vec2 from = xy(curr->obb.center);
  const double angle = clockwise_angle(from, situation.pose.yaw, xy(prev->center));
  return {hour_from_clockwise(angle), (prev->center - curr->obb.center).norm()};
}

std::vector<ObjectId> warning_targets(const ScanPair& pair) {
  std::set<ObjectId> changed;
  for (const auto& ch : pair.changes) changed.insert(ch.any_id());
  std::vector<ObjectId> out;
  for (const auto& o : pair.curr.objects) {
    if (changed.count(o.id) || is_structural(o.label)) continue;
    if (pair.curr.count_label(o.label) == 1) out.push_back(o.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<VerticalRelation> involving(const std::vector<VerticalRelation>& all, ObjectId id) {
  std::vector<VerticalRelation> out;
  for (const auto& r : all) {
    if (r.subject_id == id || r.object_id == id) out.push_back(r);
  }
  return out;
}

std::string key_of(const ScanPair& pair, ObjectId id) {
  if (const auto* o = pair.curr.find(id)) return o->key();
  if (const auto* o = pair.prev.find(id)) return o->key();
  return "object_" + std::to_string(id);
}

std::string render_relations(const std::vector<VerticalRelation>& rels, const ScanPair& pair,
                             ObjectId self, bool drop_self_subject) {
  if (rels.empty()) return "none";
  std::string out;
  for (const auto& r : rels) {
    if (!out.empty()) out += ", ";
    if (!(drop_self_subject && r.subject_id == self)) out += key_of(pair, r.subject_id) + " ";
    out += to_string(r.kind) + " " + key_of(pair, r.object_id);
  }
  return out;
}

}  // namespace

ContextRecord build_context(const ScanPair& pair, const Situation& situation,
                            const GeometryConfig& geo) {
  ContextRecord ctx;
  ctx.pair_id = pair.pair_id;
  ctx.situation_id = situation.situation_id;
  ctx.brief_text = situation.brief_text;

  const auto groups = classify_changes(pair);
  const auto rel_curr = vertical_relations(pair.curr, geo);
  const auto rel_prev = vertical_relations(pair.prev, geo);

  std::map<ObjectId, std::vector<ObjectId>> warnings;
  for (ObjectId target : warning_targets(pair)) {
    for (ObjectId blocker : route_obstacles(situation.pose, pair.curr.at(target), pair, geo)) {
      warnings[blocker].push_back(target);
    }
  }

  const std::pair<ContextGroup, const std::vector<ObjectId>*> order[] = {
      {ContextGroup::removed, &groups.removed}, {ContextGroup::added, &groups.added},
      {ContextGroup::rigid, &groups.rigid},     {ContextGroup::non_rigid, &groups.non_rigid},
      {ContextGroup::unchanged, &groups.unchanged}};
  for (const auto& [group, ids] : order) {
    for (ObjectId id : *ids) {
      const auto* curr = pair.curr.find(id);
      const auto* prev = pair.prev.find(id);
      const ObjectInstance& obj = curr ? *curr : *prev;
      if (is_structural(obj.label)) continue;
      ContextEntry e;
      e.id = id;
      e.key = obj.key();
      e.label = obj.label;
      e.group = group;
      e.attributes = obj.attributes;
      if (curr) e.location = egocentric_position(situation.pose, *curr);
      const ChangeRecord* ch = pair.change_for(id);
      if (prev && (group == ContextGroup::rigid || group == ContextGroup::removed)) {
        e.location_old = egocentric_position(situation.pose, pair.alignment.apply(prev->obb.center));
      }
      if (group == ContextGroup::rigid) {
        const double d = displacement(*ch, pair);
        if (round_to(d, geo.distance_round_m) > 0.0) {
          e.move_distance = d;
          e.return_vec = return_vector(*ch, situation, pair);
        }
      }
      if (curr) e.allocentric = involving(rel_curr, id);
      if (prev) {
        auto old = involving(rel_prev, id);
        if (curr ? old != e.allocentric : !old.empty()) e.allocentric_old = std::move(old);
      }
      if (auto it = warnings.find(id); it != warnings.end()) e.warning = it->second;
      if (ch && ch->human_fields) {
        const auto& h = *ch->human_fields;
        if (!h.description.empty()) e.caption = h.description;
        if (!h.rearrangement.empty() &&
            (group == ContextGroup::rigid || group == ContextGroup::non_rigid)) {
          e.instruction = h.rearrangement;
        }
      }
      ctx.entries.push_back(std::move(e));
    }
  }
  return ctx;
}

ordered_json context_payload(const ContextRecord& ctx, const ScanPair& pair, ContextShape shape,
                             const GeometryConfig& geo) {
  const double step = geo.distance_round_m;
  ordered_json data = ordered_json::object();
  for (const auto& e : ctx.entries) {
    ordered_json j = ordered_json::object();
    if (shape == ContextShape::longform) {
      if (!e.attributes.empty()) {
        ordered_json attrs = ordered_json::array();
        for (const auto& a : e.attributes) attrs.push_back(a.value);
        j["attributes"] = attrs;
      }
      if (e.location) j["location"] = format_location(*e.location, step);
      if (e.return_vec) j["return"] = format_location(*e.return_vec, step);
      if (e.location_old) j["location_old"] = format_location(*e.location_old, step);
      if (e.allocentric_old) j["allocentric_old"] = render_relations(*e.allocentric_old, pair, e.id, false);
      if (!e.allocentric.empty()) j["allocentric"] = render_relations(e.allocentric, pair, e.id, false);
      if (e.move_distance) j["move_distance"] = format_meters(*e.move_distance, step);
      if (!e.warning.empty()) {
        ordered_json w = ordered_json::array();
        for (ObjectId t : e.warning) w.push_back(key_of(pair, t));
        j["Warning"] = w;
      }
      if (e.caption) j["Caption"] = *e.caption;
      if (e.instruction) j["Instruction"] = *e.instruction;
    } else {
      for (auto f : {Facet::color, Facet::material, Facet::shape, Facet::size, Facet::state}) {
        ordered_json vals = ordered_json::array();
        for (const auto& a : e.attributes) {
          if (a.facet == f) vals.push_back(a.value);
        }
        if (!vals.empty()) j[to_string(f)] = vals;
      }
      if (e.location) j["location"] = format_location(*e.location, step);
      if (e.move_distance) j["move_distance"] = format_meters(*e.move_distance, step);
      if (e.location_old) j["location_old"] = format_location(*e.location_old, step);
      if (!e.warning.empty()) {
        ordered_json w = ordered_json::array();
        for (ObjectId t : e.warning) w.push_back(key_of(pair, t));
        j["Warning"] = w;
      }
      if (e.allocentric_old) j["allocentric_old"] = render_relations(*e.allocentric_old, pair, e.id, true);
      if (!e.allocentric.empty()) j["allocentric"] = render_relations(e.allocentric, pair, e.id, true);
    }
    data[to_string(e.group)][e.key] = j;
  }
  return data;
}

namespace {

std::string number_word(int n) {
  static const char* kWords[] = {"zero",    "one",     "two",       "three",    "four",
                                 "five",    "six",     "seven",     "eight",    "nine",
                                 "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                                 "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
                                 "twenty"};
  return n >= 0 && n <= 20 ? kWords[n] : std::to_string(n);
}

std::string clock(const EgoPosition& p) { return std::to_string(p.hour.hour) + " o'clock"; }

}  // namespace

std::string steps_phrase(double meters, double step_m) {
  const long halves = std::lround(meters / step_m * 2.0);
  if (halves <= 0) return "less than half a step";
  if (halves == 1) return "half a step";
  const int whole = static_cast<int>(halves / 2);
  if (halves % 2 == 1) return number_word(whole) + " and a half steps";
  return number_word(whole) + (whole == 1 ? " step" : " steps");
}

LongFormText template_longform(const ContextEntry& e, const GeometryConfig& geo,
                               const ContextConfig& cfg) {
  const double step = geo.distance_round_m;
  auto where = [&](const EgoPosition& p) {
    return "your " + clock(p) + ", " + format_meters(p.distance, step) + " away";
  };
  auto reach = [&](const EgoPosition& p) {
    return "1. Turn to your " + clock(p) + " and take " + steps_phrase(p.distance, cfg.step_m) +
           " to reach the " + e.label + ".";
  };
  LongFormText out;
  switch (e.group) {
    case ContextGroup::removed:
      out.description = "The " + e.label + " that was at " + where(*e.location_old) + " has been removed.";
      break;
    case ContextGroup::added:
      out.description = "A " + e.label + " has appeared at " + where(*e.location) + ".";
      break;
    case ContextGroup::rigid:
      if (e.move_distance) {
        out.description = "The " + e.label + " now at " + where(*e.location) + " was at " +
                          where(*e.location_old) + " before and has been moved " +
                          format_meters(*e.move_distance, step) + ".";
        out.rearrangement = reach(*e.location) + " 2. Move the " + e.label + " " +
                            steps_phrase(e.return_vec->distance, cfg.step_m) + " toward your " +
                            clock(*e.return_vec) + ".";
      } else {
        out.description = "The " + e.label + " at " + where(*e.location) + " has been turned in place.";
        out.rearrangement = reach(*e.location) + " 2. Turn the " + e.label + " back to its previous orientation.";
      }
      break;
    case ContextGroup::non_rigid:
      out.description = "The " + e.label + " at " + where(*e.location) + " has changed its shape or state.";
      out.rearrangement = reach(*e.location) + " 2. Restore the " + e.label + " to its previous state.";
      break;
    case ContextGroup::unchanged:
      out.description = "The " + e.label + " at " + where(*e.location) + " has not changed.";
      break;
  }
  return out;
}

}  // namespace situ
