#include "situ/query.hpp"

#include <algorithm>
#include <map>

namespace situ {

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::landmark_self: return "landmark_self";
    case FeatureKind::distinctive_color: return "distinctive_color";
    case FeatureKind::extremity_nearest: return "extremity_nearest";
    case FeatureKind::extremity_farthest: return "extremity_farthest";
    case FeatureKind::vertical_to_landmark: return "vertical_to_landmark";
    case FeatureKind::manual: return "manual";
  }
  return "manual";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  for (auto k : {FeatureKind::landmark_self, FeatureKind::distinctive_color,
                 FeatureKind::extremity_nearest, FeatureKind::extremity_farthest,
                 FeatureKind::vertical_to_landmark, FeatureKind::manual}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown feature kind: " + s);
}

std::string to_string(Tense t) { return t == Tense::past ? "past" : "present"; }

Tense tense_from_string(const std::string& s) {
  if (s == "past") return Tense::past;
  if (s == "present") return Tense::present;
  throw ValidationError("unknown tense: " + s);
}

std::string to_string(QueryTask t) {
  return t == QueryTask::description ? "description" : "rearrangement";
}

std::string FeatureCandidate::feature_id() const {
  std::string arg;
  switch (kind) {
    case FeatureKind::landmark_self: arg = "self"; break;
    case FeatureKind::distinctive_color: arg = text_fragment; break;
    case FeatureKind::extremity_nearest:
    case FeatureKind::extremity_farthest: arg = std::to_string(landmark_id.value_or(0)); break;
    case FeatureKind::vertical_to_landmark:
      arg = std::to_string(landmark_id.value_or(0)) + "." +
            (relation ? to_string(*relation) : std::string("related")) + "." +
            (object_is_subject ? "subject" : "support");
      break;
    case FeatureKind::manual: arg = "manual"; break;
  }
  return to_string(kind) + ":" + arg + ":" + to_string(tense);
}

std::set<ObjectId> find_landmarks(const SceneScan& scan, const QueryConfig& cfg) {
  std::map<std::string, int> counts;
  for (const auto& o : scan.objects) ++counts[o.label];
  std::set<ObjectId> out;
  for (const auto& o : scan.objects) {
    if (counts[o.label] != 1 || is_structural(o.label)) continue;
    const auto& bl = cfg.landmark_blacklist;
    if (std::find(bl.begin(), bl.end(), o.label) != bl.end()) continue;
    out.insert(o.id);
  }
  return out;
}

namespace {

std::vector<const ObjectInstance*> same_label(const SceneScan& scan, const std::string& label) {
  std::vector<const ObjectInstance*> out;
  for (const auto& o : scan.objects) {
    if (o.label == label) out.push_back(&o);
  }
  return out;
}

double center_distance(const ObjectInstance& a, const ObjectInstance& b) {
  return (xy(a.obb.center) - xy(b.obb.center)).norm();
}

constexpr double kStrict = 1e-6;

// Is `o` strictly nearest (or farthest) to `landmark` among `group`?
bool is_extreme(const ObjectInstance& o, const std::vector<const ObjectInstance*>& group,
                const ObjectInstance& landmark, bool nearest) {
  const double d = center_distance(o, landmark);
  for (const auto* other : group) {
    if (other->id == o.id) continue;
    const double e = center_distance(*other, landmark);
    if (nearest ? !(d < e - kStrict) : !(d > e + kStrict)) return false;
  }
  return true;
}

bool has_relation(const std::vector<VerticalRelation>& rels, ObjectId self, ObjectId landmark,
                  VerticalKind kind, bool self_is_subject) {
  for (const auto& r : rels) {
    if (r.kind != kind) continue;
    if (self_is_subject && r.subject_id == self && r.object_id == landmark) return true;
    if (!self_is_subject && r.object_id == self && r.subject_id == landmark) return true;
  }
  return false;
}

std::string support_phrase(VerticalKind k) {
  switch (k) {
    case VerticalKind::hanging_on: return "hanging on it";
    case VerticalKind::attached_to: return "attached to it";
    default: return "on it";
  }
}

bool has_color(const ObjectInstance& o, const std::string& color) {
  for (const auto& a : o.attributes) {
    if (a.facet == Facet::color && a.value == color) return true;
  }
  return false;
}

int priority(FeatureKind k) {
  switch (k) {
    case FeatureKind::manual: return -1;
    case FeatureKind::landmark_self: return 0;
    case FeatureKind::distinctive_color: return 1;
    case FeatureKind::vertical_to_landmark: return 2;
    case FeatureKind::extremity_nearest:
    case FeatureKind::extremity_farthest: return 3;
  }
  return 4;
}

}  // namespace

std::vector<FeatureCandidate> candidate_features(ObjectId object_id, const SceneScan& scan,
                                                 const std::set<ObjectId>& landmarks, Tense tense,
                                                 const GeometryConfig& geo) {
  std::vector<FeatureCandidate> out;
  const auto* obj = scan.find(object_id);
  if (obj == nullptr || is_structural(obj->label)) return out;
  const auto group = same_label(scan, obj->label);
  auto make = [&](FeatureKind kind, std::optional<ObjectId> lm, std::string text) {
    FeatureCandidate c;
    c.object_id = object_id;
    c.kind = kind;
    c.landmark_id = lm;
    c.text_fragment = std::move(text);
    c.tense = tense;
    return c;
  };

  if (landmarks.count(object_id)) out.push_back(make(FeatureKind::landmark_self, std::nullopt, ""));

  for (const auto& value : obj->facet_values(Facet::color)) {
    bool unique = true;
    for (const auto* other : group) unique &= other->id == object_id || !has_color(*other, value);
    if (unique && std::none_of(out.begin(), out.end(), [&](const auto& c) {
          return c.kind == FeatureKind::distinctive_color && c.text_fragment == value;
        })) {
      out.push_back(make(FeatureKind::distinctive_color, std::nullopt, value));
    }
  }

  if (group.size() >= 2) {
    for (ObjectId lm_id : landmarks) {
      const auto* lm = scan.find(lm_id);
      if (lm == nullptr || lm_id == object_id || lm->label == obj->label) continue;
      if (is_extreme(*obj, group, *lm, true)) {
        out.push_back(make(FeatureKind::extremity_nearest, lm_id, "nearest to the " + lm->label));
      }
      if (is_extreme(*obj, group, *lm, false)) {
        out.push_back(make(FeatureKind::extremity_farthest, lm_id, "farthest from the " + lm->label));
      }
    }
  }

  const auto rels = vertical_relations(scan, geo);
  for (const auto& r : rels) {
    const bool subject = r.subject_id == object_id;
    if (!subject && r.object_id != object_id) continue;
    const ObjectId lm_id = subject ? r.object_id : r.subject_id;
    if (!landmarks.count(lm_id)) continue;
    int matches = 0;
    for (const auto* other : group) matches += has_relation(rels, other->id, lm_id, r.kind, subject);
    if (matches != 1) continue;
    const auto& lm = scan.at(lm_id);
    const std::string text = subject ? to_string(r.kind) + " the " + lm.label
                                     : "has the " + lm.label + " " + support_phrase(r.kind);
    auto c = make(FeatureKind::vertical_to_landmark, lm_id, text);
    c.relation = r.kind;
    c.object_is_subject = subject;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<FeatureCandidate> candidate_features(const ScanPair& pair, ObjectId object_id,
                                                 const QueryConfig& cfg, const GeometryConfig& geo) {
  auto out = candidate_features(object_id, pair.curr, find_landmarks(pair.curr, cfg), Tense::present, geo);
  auto past = candidate_features(object_id, pair.prev, find_landmarks(pair.prev, cfg), Tense::past, geo);
  out.insert(out.end(), past.begin(), past.end());
  return out;
}

bool verify_unique(const FeatureCandidate& c, const SceneScan& scan, const GeometryConfig& geo) {
  const auto* obj = scan.find(c.object_id);
  if (obj == nullptr) return false;
  if (c.kind == FeatureKind::manual) return true;
  const auto group = same_label(scan, obj->label);
  const auto rels = vertical_relations(scan, geo);
  std::vector<ObjectId> matching;
  for (const auto* o : group) {
    bool match = false;
    switch (c.kind) {
      case FeatureKind::landmark_self:
        match = group.size() == 1;
        break;
      case FeatureKind::distinctive_color:
        match = has_color(*o, c.text_fragment);
        break;
      case FeatureKind::extremity_nearest:
      case FeatureKind::extremity_farthest: {
        const auto* lm = scan.find(*c.landmark_id);
        match = lm && is_extreme(*o, group, *lm, c.kind == FeatureKind::extremity_nearest);
        break;
      }
      case FeatureKind::vertical_to_landmark:
        match = has_relation(rels, o->id, *c.landmark_id, *c.relation, c.object_is_subject);
        break;
      case FeatureKind::manual:
        break;
    }
    if (match) matching.push_back(o->id);
  }
  return matching.size() == 1 && matching[0] == c.object_id;
}

Resolution resolve_feature(ObjectId object_id, const std::vector<FeatureCandidate>& candidates,
                           const ObjectReview* review) {
  if (review && review->manual) {
    FeatureCandidate m;
    m.object_id = object_id;
    m.kind = FeatureKind::manual;
    m.text_fragment = review->manual->text;
    m.tense = Tense::present;
    return m;
  }
  if (review && review->accepted) {
    for (const auto& c : candidates) {
      if (c.feature_id() == *review->accepted) return c;
    }
  }
  std::vector<const FeatureCandidate*> alive;
  for (const auto& c : candidates) {
    if (c.object_id != object_id) continue;
    if (review && review->rejected.count(c.feature_id())) continue;
    alive.push_back(&c);
  }
  if (alive.empty()) return NeedsReview{object_id};
  std::stable_sort(alive.begin(), alive.end(),
                   [](auto* a, auto* b) { return priority(a->kind) < priority(b->kind); });
  return *alive.front();
}

std::string render_query(const std::string& label, const FeatureCandidate& f,
                         std::size_t same_label_count, QueryTask task, int variant) {
  const bool past = f.tense == Tense::past;
  std::string np;
  switch (f.kind) {
    case FeatureKind::landmark_self:
      np = "the " + label;
      break;
    case FeatureKind::distinctive_color:
      np = "the " + f.text_fragment + " " + label;
      break;
    case FeatureKind::extremity_nearest:
    case FeatureKind::extremity_farthest: {
      std::string rel = f.text_fragment;
      if (same_label_count == 2) {
        for (auto [from, to] : {std::pair{"nearest to", "nearer to"}, {"farthest from", "farther from"}}) {
          if (rel.rfind(from, 0) == 0) rel = to + rel.substr(std::string(from).size());
        }
      }
      np = "the " + label + " that " + (past ? "stood " : "is ") + rel;
      break;
    }
    case FeatureKind::vertical_to_landmark:
      if (f.object_is_subject) {
        np = "the " + label + " that " + (past ? "was " : "is ") + f.text_fragment;
      } else {
        std::string rest = f.text_fragment.substr(std::string("has ").size());
        np = "the " + label + " that " + (past ? "had " : "has ") + rest;
      }
      break;
    case FeatureKind::manual:
      np = "the " + label + " " + f.text_fragment;
      break;
  }
  static const char* kDescription[kQueryVariants][2] = {
      {"What change happened to ", "?"},
      {"What changes have been made to ", "?"},
      {"How has ", " been altered?"},
  };
  static const char* kRearrange[kQueryVariants][2] = {
      {"How do I put ", " back the way it was?"},
      {"How can I restore ", " to its previous state?"},
      {"What should I do to return ", " to where it was?"},
  };
  const int v = ((variant % kQueryVariants) + kQueryVariants) % kQueryVariants;
  const auto& t = task == QueryTask::description ? kDescription[v] : kRearrange[v];
  return t[0] + np + t[1];
}

int query_variant(const std::string& pair_id, ObjectId object_id, const std::string& feature_id,
                  QueryTask task) {
  std::uint64_t h = 1469598103934665603ull;
  const std::string key = pair_id + "|" + std::to_string(object_id) + "|" + feature_id + "|" + to_string(task);
  for (unsigned char ch : key) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return static_cast<int>(h % kQueryVariants);
}

std::string review_task_id(const std::string& pair_id, ObjectId object_id) {
  return pair_id + ":" + std::to_string(object_id);
}

}  // namespace situ
