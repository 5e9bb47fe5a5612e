#include "situ/qa.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace situ {

using nlohmann::ordered_json;

std::string to_string(QaType t) {
  switch (t) {
    case QaType::affordance: return "affordance";
    case QaType::attribute: return "attribute";
    case QaType::existence: return "existence";
    case QaType::counting: return "counting";
    case QaType::warning: return "warning";
    case QaType::allo_relationship: return "allo_relationship";
    case QaType::allo_displacement: return "allo_displacement";
    case QaType::ego_direction_pre: return "ego_direction_pre";
    case QaType::ego_direction_post: return "ego_direction_post";
    case QaType::ego_distance_pre: return "ego_distance_pre";
    case QaType::ego_distance_post: return "ego_distance_post";
  }
  return "existence";
}

QaType qa_type_from_string(const std::string& s) {
  for (QaType t : kAllQaTypes) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("unknown QA type tag: " + s);
}

std::optional<QaType> qa_type_from_label(const std::string& label) {
  std::string n;
  for (unsigned char c : label) {
    if (std::isalnum(c)) n += static_cast<char>(std::tolower(c));
  }
  auto has = [&](const char* s) { return n.find(s) != std::string::npos; };
  const bool old = has("old") || has("pre");
  if (n.rfind("ego", 0) == 0) {
    if (has("dir")) return old ? QaType::ego_direction_pre : QaType::ego_direction_post;
    if (has("dis")) return old ? QaType::ego_distance_pre : QaType::ego_distance_post;
    return std::nullopt;
  }
  if (n.rfind("allo", 0) == 0) {
    if (has("rel")) return QaType::allo_relationship;
    if (has("dis")) return QaType::allo_displacement;
    return std::nullopt;
  }
  if (n == "affordance") return QaType::affordance;
  if (n == "attribute") return QaType::attribute;
  if (n == "existence" || n == "existance") return QaType::existence;
  if (n == "counting") return QaType::counting;
  if (n == "warning") return QaType::warning;
  return std::nullopt;
}

std::string family(QaType t) {
  switch (t) {
    case QaType::ego_direction_pre:
    case QaType::ego_direction_post: return "ego_direction";
    case QaType::ego_distance_pre:
    case QaType::ego_distance_post: return "ego_distance";
    default: return to_string(t);
  }
}

std::string to_string(QaGroup g) {
  switch (g) {
    case QaGroup::egocentric: return "egocentric";
    case QaGroup::allocentric: return "allocentric";
    case QaGroup::general: return "general";
  }
  return "general";
}

QaGroup qa_group(QaType t) {
  switch (t) {
    case QaType::warning:
    case QaType::ego_direction_pre:
    case QaType::ego_direction_post:
    case QaType::ego_distance_pre:
    case QaType::ego_distance_post: return QaGroup::egocentric;
    case QaType::allo_relationship:
    case QaType::allo_displacement: return QaGroup::allocentric;
    default: return QaGroup::general;
  }
}

ordered_json QAItem::to_json() const {
  ordered_json j;
  j["item_id"] = item_id;
  j["scan_pair_id"] = scan_pair_id;
  j["situation_id"] = situation_id;
  j["qa_type"] = to_string(qa_type);
  j["question"] = question;
  j["answer"] = answer;
  j["ocot"] = {{"object_ids", ocot.object_ids}, {"type_tag", ocot.type_tag}, {"args", ocot.args}};
  return j;
}

QAItem QAItem::from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ValidationError("QA item must be a JSON object");
  QAItem q;
  q.item_id = j.value("item_id", "");
  q.scan_pair_id = j.at("scan_pair_id").get<std::string>();
  q.situation_id = j.at("situation_id").get<std::string>();
  q.qa_type = qa_type_from_string(j.at("qa_type").get<std::string>());
  q.question = j.at("question").get<std::string>();
  q.answer = j.at("answer").get<std::string>();
  const auto& o = j.at("ocot");
  q.ocot.object_ids = o.at("object_ids").get<std::vector<ObjectId>>();
  q.ocot.type_tag = o.at("type_tag").get<std::string>();
  if (o.contains("args")) q.ocot.args = o["args"];
  return q;
}

// --- phrasing ---------------------------------------------------------------------------------

std::string number_word(int n) {
  static const char* kWords[] = {"Zero", "One", "Two",   "Three", "Four",   "Five", "Six",
                                 "Seven", "Eight", "Nine", "Ten", "Eleven", "Twelve"};
  if (n >= 0 && n <= 12) return kWords[n];
  return std::to_string(n);
}

std::string plural(const std::string& label) {
  const auto space = label.rfind(' ');
  const std::string head = space == std::string::npos ? "" : label.substr(0, space + 1);
  const std::string w = space == std::string::npos ? label : label.substr(space + 1);
  auto ends = [&](const std::string& s) {
    return w.size() >= s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0;
  };
  static const std::map<std::string, std::string> kIrregular{
      {"shelf", "shelves"}, {"clothes", "clothes"}, {"person", "people"}, {"knife", "knives"},
      {"leaf", "leaves"},   {"glasses", "glasses"}, {"scissors", "scissors"}};
  if (auto it = kIrregular.find(w); it != kIrregular.end()) return head + it->second;
  if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh")) return head + w + "es";
  if (w.size() >= 2 && w.back() == 'y' && !std::strchr("aeiou", w[w.size() - 2])) {
    return head + w.substr(0, w.size() - 1) + "ies";
  }
  return head + w + "s";
}

std::string count_phrase(const std::vector<std::string>& labels) {
  std::vector<std::pair<std::string, int>> counts;
  for (const auto& l : labels) {
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == l; });
    if (it == counts.end()) {
      counts.emplace_back(l, 1);
    } else {
      ++it->second;
    }
  }
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& [label, n] = counts[i];
    std::string part;
    if (n == 1) {
      part = (std::strchr("aeiou", label[0]) ? "an " : "a ") + label;
    } else {
      part = number_word(n) + " " + plural(label);
      part[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(part[0])));
    }
    if (i > 0) out += i + 1 == counts.size() ? " and " : ", ";
    out += part;
  }
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string meters_answer(double meters, double step) {
  std::string s = format_meters(meters, step);
  s.pop_back();
  return s + " m";
}

std::optional<double> parse_meters(const std::string& text) {
  static const std::regex re(
      R"(^\s*(-?[0-9]+(?:\.[0-9]+)?)\s*(m|cm|meters?|metres?|centimeters?|centimetres?)\.?\s*$)",
      std::regex::icase);
  std::smatch m;
  if (!std::regex_match(text, m, re)) return std::nullopt;
  double v = std::stod(m[1].str());
  std::string unit = m[2].str();
  std::transform(unit.begin(), unit.end(), unit.begin(), [](unsigned char c) { return std::tolower(c); });
  if (unit.rfind("c", 0) == 0) v /= 100.0;
  return v;
}

std::size_t word_count(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

namespace {

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

double degrees(double rad) { return rad * 180.0 / kPi; }

// Angular distance from the observer's clockwise bearing to the nearest multiple of `period`
// shifted by `offset` degrees.
double boundary_gap(const ObserverPose& pose, Vec3 target, double period, double offset) {
  const double deg = degrees(clockwise_angle(pose.standing_point(), pose.yaw, xy(target)));
  const double r = std::fmod(deg + offset, period);
  return std::min(r, period - r);
}

bool too_close(const ObserverPose& pose, Vec3 target, const QaConfig& cfg) {
  return (xy(target) - pose.standing_point()).norm() < cfg.min_distance_m;
}

bool hour_determinate(const ObserverPose& pose, Vec3 target, const QaConfig& cfg) {
  return !too_close(pose, target, cfg) && boundary_gap(pose, target, 30.0, 15.0) >= cfg.boundary_margin_deg;
}

bool bucket_determinate(const ObserverPose& pose, Vec3 target, const QaConfig& cfg) {
  return !too_close(pose, target, cfg) && boundary_gap(pose, target, 90.0, 45.0) >= cfg.boundary_margin_deg;
}

std::string hour_answer(ClockHour h) { return std::to_string(h.hour) + " o'clock"; }

std::string direction_phrase(Proximity p) {
  switch (p) {
    case Proximity::front: return "in front of me";
    case Proximity::left: return "to my left";
    case Proximity::right: return "to my right";
    case Proximity::back: return "behind me";
  }
  return "in front of me";
}

std::optional<Proximity> proximity_from_string(const std::string& s) {
  for (auto p : {Proximity::front, Proximity::left, Proximity::right, Proximity::back}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

std::string facet_word(Facet f) { return f == Facet::state ? "status" : to_string(f); }

std::set<ObjectId> changed_ids(const ScanPair& pair, bool prev_side) {
  std::set<ObjectId> out;
  for (const auto& c : pair.changes) {
    const auto& id = prev_side ? c.object_id_prev : c.object_id_curr;
    if (id) out.insert(*id);
  }
  return out;
}

// Short noun phrase that picks `obj` out of `scan` for question text, or nullopt when no cheap
// phrase is unambiguous.
std::optional<std::string> refer(const ObjectInstance& obj, const SceneScan& scan,
                                 const std::set<ObjectId>& changed, bool allow_color) {
  std::vector<const ObjectInstance*> same;
  for (const auto& o : scan.objects) {
    if (o.label == obj.label) same.push_back(&o);
  }
  if (same.size() == 1) return "the " + obj.label;
  if (changed.count(obj.id)) {
    const auto n_changed = std::count_if(same.begin(), same.end(), [&](auto* o) { return changed.count(o->id) > 0; });
    if (n_changed == 1) return "the changed " + obj.label;
  }
  if (allow_color) {
    for (const auto& color : obj.facet_values(Facet::color)) {
      const bool unique = std::none_of(same.begin(), same.end(), [&](auto* o) {
        if (o->id == obj.id) return false;
        const auto v = o->facet_values(Facet::color);
        return std::find(v.begin(), v.end(), color) != v.end();
      });
      if (unique) return "the " + color + " " + obj.label;
    }
  }
  return std::nullopt;
}

std::vector<ObjectId> ids_with_labels(const SceneScan& scan, const std::set<std::string>& labels) {
  std::vector<ObjectId> out;
  for (const auto& o : scan.objects) {
    if (labels.count(o.label)) out.push_back(o.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> labels_of(const SceneScan& scan, const std::vector<ObjectId>& ids) {
  std::vector<std::string> out;
  for (ObjectId id : ids) out.push_back(scan.at(id).label);
  return out;
}

std::set<std::string> purpose_labels(const QaConfig& cfg, const std::string& purpose) {
  std::set<std::string> out;
  for (const auto& [label, p] : cfg.affordances) {
    if (p == purpose) out.insert(label);
  }
  return out;
}

// Objects of `label` in `bucket`, or nullopt when any instance sits on a bucket boundary.
std::optional<std::vector<ObjectId>> count_in_bucket(const SceneScan& scan, const ObserverPose& pose,
                                                     const std::string& label, Proximity bucket,
                                                     const QaConfig& cfg) {
  std::vector<ObjectId> out;
  for (const auto& o : scan.objects) {
    if (o.label != label) continue;
    if (!bucket_determinate(pose, o.obb.center, cfg)) return std::nullopt;
    if (proximity_bucket(egocentric_position(pose, o).hour) == bucket) out.push_back(o.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool answer_short(const std::string& a) { return word_count(a) <= 5; }

class Builder {
 public:
  Builder(const ScanPair& pair, const Situation& situation)
      : pair_(pair), sit_(situation),
        changed_curr_(changed_ids(pair, false)), changed_prev_(changed_ids(pair, true)) {}

  void add(QaType t, std::string q, std::string a, std::vector<ObjectId> ids,
           ordered_json args = ordered_json::object()) {
    if (t != QaType::ego_distance_pre && t != QaType::ego_distance_post &&
        t != QaType::allo_displacement && !answer_short(a)) {
      return;
    }
    QAItem item;
    item.scan_pair_id = pair_.pair_id;
    item.situation_id = sit_.situation_id;
    item.qa_type = t;
    item.question = std::move(q);
    item.answer = std::move(a);
    item.ocot.object_ids = std::move(ids);
    item.ocot.type_tag = to_string(t);
    item.ocot.args = std::move(args);
    by_type_[t].push_back(std::move(item));
  }

  std::optional<std::string> np_curr(const ObjectInstance& o, bool allow_color = true) const {
    return refer(o, pair_.curr, changed_curr_, allow_color);
  }
  std::optional<std::string> np_prev(const ObjectInstance& o) const {
    return refer(o, pair_.prev, changed_prev_, true);
  }

  std::map<QaType, std::vector<QAItem>>& items() { return by_type_; }

 private:
  const ScanPair& pair_;
  const Situation& sit_;
  std::set<ObjectId> changed_curr_;
  std::set<ObjectId> changed_prev_;
  std::map<QaType, std::vector<QAItem>> by_type_;
};

}  // namespace

std::vector<QAItem> generate_qa(const ScanPair& pair, const Situation& situation,
                                const ContextRecord& context, std::uint64_t rng_seed,
                                const QaConfig& cfg, const GeometryConfig& geo) {
  Builder b(pair, situation);
  const auto& pose = situation.pose;
  const double step = geo.distance_round_m;

  for (const auto& e : context.entries) {
    const auto* curr = pair.curr.find(e.id);
    const auto* prev = pair.prev.find(e.id);

    if (e.location_old && prev) {
      const Vec3 old_center = pair.alignment.apply(prev->obb.center);
      if (auto np = b.np_prev(*prev)) {
        if (!too_close(pose, old_center, cfg)) {
          b.add(QaType::ego_distance_pre, "How far was " + *np + " from me?",
                meters_answer(e.location_old->distance, step), {e.id});
        }
        if (hour_determinate(pose, old_center, cfg)) {
          b.add(QaType::ego_direction_pre, "Which direction was " + *np + " relative to me?",
                hour_answer(e.location_old->hour), {e.id});
        }
      }
    }

    if (e.location && curr) {
      if (auto np = b.np_curr(*curr)) {
        if (!too_close(pose, curr->obb.center, cfg)) {
          b.add(QaType::ego_distance_post, "How far is " + *np + " from me?",
                meters_answer(e.location->distance, step), {e.id});
        }
        if (hour_determinate(pose, curr->obb.center, cfg)) {
          b.add(QaType::ego_direction_post, "Which direction is " + *np + " relative to me?",
                hour_answer(e.location->hour), {e.id});
        }
      }
    }

    if (e.move_distance && curr) {
      if (auto np = b.np_curr(*curr)) {
        b.add(QaType::allo_displacement, "How far was " + *np + " moved?",
              meters_answer(*e.move_distance, step), {e.id});
      }
    }

    if (curr) {
      for (const auto& r : e.allocentric) {
        if (r.subject_id != e.id) continue;
        const auto& support = pair.curr.at(r.object_id);
        if (is_structural(support.label)) continue;
        if (auto np = b.np_curr(*curr)) {
          b.add(QaType::allo_relationship, "Where is " + *np + "?",
                capitalize(to_string(r.kind)) + " the " + support.label, {e.id, r.object_id},
                {{"scan", "curr"}});
        }
        break;
      }
    }
    if (e.allocentric_old && prev) {
      for (const auto& r : *e.allocentric_old) {
        if (r.subject_id != e.id) continue;
        const auto& support = pair.prev.at(r.object_id);
        if (is_structural(support.label)) continue;
        if (auto np = b.np_prev(*prev)) {
          b.add(QaType::allo_relationship, "Where was " + *np + "?",
                capitalize(to_string(r.kind)) + " the " + support.label, {e.id, r.object_id},
                {{"scan", "prev"}});
        }
        break;
      }
    }

    if (curr) {
      for (Facet f : {Facet::state, Facet::color, Facet::material}) {
        std::vector<std::string> values;
        for (const auto& a : e.attributes) {
          if (a.facet == f) values.push_back(a.value);
        }
        if (values.empty()) continue;
        if (auto np = b.np_curr(*curr, f != Facet::color)) {
          b.add(QaType::attribute, "What is the " + facet_word(f) + " of " + *np + "?",
                capitalize(join(values, " and ")), {e.id}, {{"facet", to_string(f)}});
        }
      }
    }
  }

  // Warning: one question per familiar target, positives first.
  std::vector<QAItem> negatives;
  for (ObjectId target : warning_targets(pair)) {
    const auto& t = pair.curr.at(target);
    std::vector<ObjectId> blockers;
    for (const auto& e : context.entries) {
      if (std::find(e.warning.begin(), e.warning.end(), target) != e.warning.end()) {
        blockers.push_back(e.id);
      }
    }
    // Context lists blockers per object; the answer follows route order from the observer.
    const auto route = route_obstacles(pose, t, pair, geo);
    std::vector<ObjectId> ordered;
    for (ObjectId id : route) {
      if (std::find(blockers.begin(), blockers.end(), id) != blockers.end()) ordered.push_back(id);
    }
    std::vector<ObjectId> ids{target};
    ids.insert(ids.end(), ordered.begin(), ordered.end());
    const std::string q = "Are there any changed objects on my familiar route to the " + t.label + "?";
    b.add(QaType::warning, q, ordered.empty() ? "No" : count_phrase(labels_of(pair.curr, ordered)), ids);
  }
  {
    auto& w = b.items()[QaType::warning];
    std::stable_partition(w.begin(), w.end(), [](const QAItem& q) { return q.answer != "No"; });
  }

  // Counting per label and bucket.
  std::set<std::string> labels;
  for (const auto& o : pair.curr.objects) {
    if (!is_structural(o.label)) labels.insert(o.label);
  }
  for (const auto& label : labels) {
    for (auto bucket : {Proximity::front, Proximity::right, Proximity::back, Proximity::left}) {
      std::vector<ObjectId> ids;
      bool determinate = true;
      for (const auto& e : context.entries) {
        if (e.label != label || !e.location) continue;
        const auto& o = pair.curr.at(e.id);
        if (!bucket_determinate(pose, o.obb.center, cfg)) determinate = false;
        if (proximity_bucket(e.location->hour) == bucket) ids.push_back(e.id);
      }
      if (!determinate || ids.empty()) continue;
      std::sort(ids.begin(), ids.end());
      b.add(QaType::counting, "How many " + plural(label) + " are there " + direction_phrase(bucket) + "?",
            number_word(static_cast<int>(ids.size())), ids,
            {{"label", label}, {"direction", to_string(bucket)}});
    }
  }

  // Existence for labels touched by additions and removals, plus one absent label.
  std::set<std::string> touched;
  for (const auto& c : pair.changes) {
    if (c.kind == ChangeKind::added && c.object_id_curr) touched.insert(pair.curr.at(*c.object_id_curr).label);
    if (c.kind == ChangeKind::removed && c.object_id_prev) touched.insert(pair.prev.at(*c.object_id_prev).label);
  }
  std::mt19937_64 rng(rng_seed);
  {
    std::vector<std::string> absent;
    for (const auto& [label, purpose] : cfg.affordances) {
      if (pair.curr.count_label(label) == 0 && pair.prev.count_label(label) == 0) absent.push_back(label);
    }
    if (!absent.empty()) touched.insert(absent[rng() % absent.size()]);
  }
  for (const auto& label : touched) {
    const auto ids = ids_with_labels(pair.curr, {label});
    b.add(QaType::existence, "Is there any " + label + " in the room?", ids.empty() ? "No" : "Yes", ids,
          {{"label", label}});
  }

  // Affordance per purpose phrase.
  std::set<std::string> purposes;
  for (const auto& [label, purpose] : cfg.affordances) purposes.insert(purpose);
  for (const auto& purpose : purposes) {
    const auto ids = ids_with_labels(pair.curr, purpose_labels(cfg, purpose));
    b.add(QaType::affordance, "Is there something to " + purpose + " in this room?",
          ids.empty() ? "No" : count_phrase(labels_of(pair.curr, ids)), ids, {{"purpose", purpose}});
  }
  {
    auto& a = b.items()[QaType::affordance];
    std::stable_partition(a.begin(), a.end(), [](const QAItem& q) { return q.answer != "No"; });
    if (a.size() > 1 && a.back().answer == "No") {
      // Keep positives and a single negative.
      auto first_no = std::find_if(a.begin(), a.end(), [](const QAItem& q) { return q.answer == "No"; });
      a.erase(first_no + 1, a.end());
    }
  }

  // Shuffle within each type (warnings and affordances keep positives first) and interleave.
  auto& by_type = b.items();
  for (auto& [type, list] : by_type) {
    if (type == QaType::warning || type == QaType::affordance) continue;
    std::shuffle(list.begin(), list.end(), rng);
  }
  std::vector<QAItem> out;
  const auto cap = static_cast<std::size_t>(cfg.max_per_situation);
  for (std::size_t round = 0; out.size() < cap; ++round) {
    bool any = false;
    for (QaType t : kAllQaTypes) {
      auto it = by_type.find(t);
      if (it == by_type.end() || round >= it->second.size()) continue;
      any = true;
      out.push_back(it->second[round]);
      if (out.size() == cap) break;
    }
    if (!any) break;
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k].item_id = situation.situation_id + ":qa:" + std::to_string(k);
  return out;
}

Verdict verify_qa(const QAItem& item, const ScanPair& pair, const Situation& situation,
                  const ContextRecord& context, const QaConfig& cfg, const GeometryConfig& geo) {
  const QaType tagged = qa_type_from_string(item.ocot.type_tag);
  if (tagged != item.qa_type) return {false, "type tag mismatch"};
  if (item.scan_pair_id != pair.pair_id || item.situation_id != situation.situation_id ||
      context.situation_id != situation.situation_id) {
    return {false, "foreign key mismatch"};
  }
  const auto& ids = item.ocot.object_ids;
  for (ObjectId id : ids) {
    if (!pair.curr.find(id) && !pair.prev.find(id)) return {false, "unknown object"};
  }
  const auto& pose = situation.pose;
  const double step = geo.distance_round_m;
  auto arg = [&](const char* key) -> std::optional<std::string> {
    if (!item.ocot.args.contains(key) || !item.ocot.args[key].is_string()) return std::nullopt;
    return item.ocot.args[key].get<std::string>();
  };
  auto same_meters = [&](double truth) -> Verdict {
    const auto got = parse_meters(item.answer);
    if (!got) return {false, "unparseable distance"};
    return std::abs(*got - round_to(truth, step)) < step / 2 ? Verdict{true, ""} : Verdict{false, "mismatch"};
  };
  auto exact = [&](const std::string& truth) -> Verdict {
    return item.answer == truth ? Verdict{true, ""} : Verdict{false, "mismatch"};
  };

  switch (item.qa_type) {
    case QaType::ego_distance_pre:
    case QaType::ego_direction_pre:
    case QaType::ego_distance_post:
    case QaType::ego_direction_post: {
      if (ids.size() != 1) return {false, "bad object list"};
      const bool pre = item.qa_type == QaType::ego_distance_pre || item.qa_type == QaType::ego_direction_pre;
      std::optional<Vec3> center;
      if (pre) {
        if (auto box = pair.aligned_prev_obb(ids[0])) center = box->center;
      } else if (const auto* o = pair.curr.find(ids[0])) {
        center = o->obb.center;
      }
      if (!center) return {false, "object absent"};
      const auto ego = egocentric_position(pose, *center);
      if (item.qa_type == QaType::ego_distance_pre || item.qa_type == QaType::ego_distance_post) {
        if (too_close(pose, *center, cfg)) return {false, "indeterminate"};
        return same_meters(ego.distance);
      }
      if (!hour_determinate(pose, *center, cfg)) return {false, "indeterminate"};
      return exact(hour_answer(ego.hour));
    }
    case QaType::allo_displacement: {
      if (ids.size() != 1) return {false, "bad object list"};
      const auto* ch = pair.change_for(ids[0]);
      if (!ch || ch->kind != ChangeKind::rigid) return {false, "indeterminate"};
      return same_meters(displacement(*ch, pair));
    }
    case QaType::allo_relationship: {
      if (ids.size() != 2) return {false, "bad object list"};
      const auto scan_name = arg("scan");
      if (!scan_name || (*scan_name != "curr" && *scan_name != "prev")) return {false, "indeterminate"};
      const auto& scan = *scan_name == "curr" ? pair.curr : pair.prev;
      const auto* a = scan.find(ids[0]);
      const auto* s = scan.find(ids[1]);
      if (!a || !s) return {false, "object absent"};
      const auto rel = vertical_relation(*a, *s, geo);
      if (!rel) return {false, "mismatch"};
      return exact(capitalize(to_string(rel->kind)) + " the " + s->label);
    }
    case QaType::attribute: {
      if (ids.size() != 1) return {false, "bad object list"};
      const auto facet_name = arg("facet");
      const auto facet = facet_name ? facet_from_string(*facet_name) : std::nullopt;
      const auto* o = pair.curr.find(ids[0]);
      if (!facet || !o) return {false, "indeterminate"};
      const auto values = o->facet_values(*facet);
      if (values.empty()) return {false, "indeterminate"};
      return exact(capitalize(join(values, " and ")));
    }
    case QaType::warning: {
      if (ids.empty()) return {false, "bad object list"};
      const auto* target = pair.curr.find(ids[0]);
      if (!target) return {false, "object absent"};
      const auto route = route_obstacles(pose, *target, pair, geo);
      // Only objects that became obstacles count; unchanged targets have no warning.
      const std::vector<ObjectId> claimed(ids.begin() + 1, ids.end());
      if (claimed != route) return {false, "mismatch"};
      return exact(route.empty() ? "No" : count_phrase(labels_of(pair.curr, route)));
    }
    case QaType::counting: {
      const auto label = arg("label");
      const auto dir_name = arg("direction");
      const auto bucket = dir_name ? proximity_from_string(*dir_name) : std::nullopt;
      if (!label || !bucket) return {false, "indeterminate"};
      const auto truth = count_in_bucket(pair.curr, pose, *label, *bucket, cfg);
      if (!truth) return {false, "indeterminate"};
      if (*truth != ids) return {false, "mismatch"};
      return exact(number_word(static_cast<int>(truth->size())));
    }
    case QaType::existence: {
      const auto label = arg("label");
      if (!label) return {false, "indeterminate"};
      const auto truth = ids_with_labels(pair.curr, {*label});
      if (truth != ids) return {false, "mismatch"};
      return exact(truth.empty() ? "No" : "Yes");
    }
    case QaType::affordance: {
      const auto purpose = arg("purpose");
      if (!purpose) return {false, "indeterminate"};
      const auto labels = purpose_labels(cfg, *purpose);
      if (labels.empty()) return {false, "indeterminate"};
      const auto truth = ids_with_labels(pair.curr, labels);
      if (truth != ids) return {false, "mismatch"};
      return exact(truth.empty() ? "No" : count_phrase(labels_of(pair.curr, truth)));
    }
  }
  return {false, "indeterminate"};
}

// --- dataset ----------------------------------------------------------------------------------

ordered_json LongFormItem::to_json() const {
  ordered_json j;
  j["item_id"] = item_id;
  j["scan_pair_id"] = scan_pair_id;
  j["situation_id"] = situation_id;
  j["object_id"] = object_id;
  j["task"] = task;
  j["query"] = query;
  j["text"] = text;
  return j;
}

LongFormItem LongFormItem::from_json(const nlohmann::ordered_json& j) {
  LongFormItem l;
  l.item_id = j.value("item_id", "");
  l.scan_pair_id = j.at("scan_pair_id").get<std::string>();
  l.situation_id = j.at("situation_id").get<std::string>();
  l.object_id = j.at("object_id").get<ObjectId>();
  l.task = j.at("task").get<std::string>();
  l.query = j.at("query").get<std::string>();
  l.text = j.at("text").get<std::string>();
  return l;
}

std::string to_string(DownsampleAxis a) {
  switch (a) {
    case DownsampleAxis::sample: return "sample";
    case DownsampleAxis::situation: return "situation";
    case DownsampleAxis::scan_pair: return "scan_pair";
  }
  return "sample";
}

DownsampleAxis downsample_axis_from_string(const std::string& s) {
  for (auto a : {DownsampleAxis::sample, DownsampleAxis::situation, DownsampleAxis::scan_pair}) {
    if (to_string(a) == s) return a;
  }
  throw ValidationError("unknown downsample axis: " + s);
}

std::vector<std::size_t> downsample_indices(
    const std::vector<std::pair<std::string, std::string>>& keys, DownsampleAxis axis,
    double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("downsample fraction must be in (0, 1]");
  }
  std::vector<std::size_t> all(keys.size());
  std::iota(all.begin(), all.end(), 0);
  if (fraction == 1.0) {
    if (all.empty()) throw ValidationError("downsampling produced an empty dataset");
    return all;
  }

  // Unit of removal per record, numbered in first-seen order.
  std::map<std::string, std::size_t> unit_of;
  std::vector<std::size_t> record_unit(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::string k;
    switch (axis) {
      case DownsampleAxis::sample: k = std::to_string(i); break;
      case DownsampleAxis::situation: k = keys[i].first + '\x1f' + keys[i].second; break;
      case DownsampleAxis::scan_pair: k = keys[i].first; break;
    }
    auto [it, inserted] = unit_of.emplace(k, unit_of.size());
    record_unit[i] = it->second;
  }
  const std::size_t n_units = unit_of.size();
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_units)));
  if (keep == 0) {
    throw ValidationError("downsampling to fraction " + std::to_string(fraction) + " of " +
                          std::to_string(n_units) + " " + to_string(axis) + " units leaves nothing");
  }
  std::vector<std::size_t> units(n_units);
  std::iota(units.begin(), units.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(units.begin(), units.end(), rng);
  std::vector<bool> kept(n_units, false);
  for (std::size_t i = 0; i < keep; ++i) kept[units[i]] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (kept[record_unit[i]]) out.push_back(i);
  }
  return out;
}

std::vector<QAItem> downsample_dataset(const std::vector<QAItem>& items, DownsampleAxis axis,
                                       double fraction, std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> keys;
  keys.reserve(items.size());
  for (const auto& q : items) keys.emplace_back(q.scan_pair_id, q.situation_id);
  std::vector<QAItem> out;
  for (std::size_t i : downsample_indices(keys, axis, fraction, seed)) out.push_back(items[i]);
  return out;
}

WordStats word_stats(const std::vector<std::string>& texts) {
  WordStats s;
  s.n = texts.size();
  if (texts.empty()) return s;
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& t : texts) {
    const double w = static_cast<double>(word_count(t));
    sum += w;
    sq += w * w;
  }
  const double n = static_cast<double>(texts.size());
  s.mean = sum / n;
  s.std = std::sqrt(std::max(0.0, sq / n - s.mean * s.mean));
  return s;
}

DatasetStats dataset_stats(const std::vector<QAItem>& items, const std::vector<LongFormItem>& longform) {
  DatasetStats st;
  st.total = items.size();
  for (QaType t : kAllQaTypes) {
    st.family_counts[family(t)] = 0;
    st.type_counts[to_string(t)] = 0;
  }
  std::map<QaGroup, std::size_t> groups{{QaGroup::egocentric, 0}, {QaGroup::allocentric, 0}, {QaGroup::general, 0}};
  std::set<std::string> pairs;
  std::set<std::pair<std::string, std::string>> situations;
  std::vector<std::string> questions;
  std::vector<std::string> answers;
  for (const auto& q : items) {
    ++st.family_counts[family(q.qa_type)];
    ++st.type_counts[to_string(q.qa_type)];
    ++groups[qa_group(q.qa_type)];
    pairs.insert(q.scan_pair_id);
    situations.emplace(q.scan_pair_id, q.situation_id);
    questions.push_back(q.question);
    answers.push_back(q.answer);
  }
  for (const auto& l : longform) {
    pairs.insert(l.scan_pair_id);
    situations.emplace(l.scan_pair_id, l.situation_id);
  }
  st.scan_pairs = pairs.size();
  st.situations = situations.size();
  auto pct = [&](std::size_t n) { return st.total ? static_cast<double>(100 * n) / static_cast<double>(st.total) : 0.0; };
  for (const auto& [f, n] : st.family_counts) st.family_share[f] = pct(n);
  for (const auto& [g, n] : groups) st.group_share[to_string(g)] = pct(n);
  st.question_words = word_stats(questions);
  st.answer_words = word_stats(answers);

  std::map<std::string, std::vector<std::string>> lq;
  std::map<std::string, std::vector<std::string>> lt;
  for (const auto& l : longform) {
    lq[l.task].push_back(l.query);
    lt[l.task].push_back(l.text);
  }
  for (const auto& [task, v] : lq) st.longform_query_words[task] = word_stats(v);
  for (const auto& [task, v] : lt) st.longform_text_words[task] = word_stats(v);
  return st;
}

namespace {

ordered_json words_json(const WordStats& w) { return {{"n", w.n}, {"mean", w.mean}, {"std", w.std}}; }

}  // namespace

ordered_json DatasetStats::to_json() const {
  ordered_json j;
  j["total"] = total;
  j["scan_pairs"] = scan_pairs;
  j["situations"] = situations;
  j["family_counts"] = family_counts;
  j["type_counts"] = type_counts;
  j["family_share"] = family_share;
  j["group_share"] = group_share;
  j["question_words"] = words_json(question_words);
  j["answer_words"] = words_json(answer_words);
  ordered_json lf = ordered_json::object();
  for (const auto& [task, w] : longform_query_words) lf[task]["query_words"] = words_json(w);
  for (const auto& [task, w] : longform_text_words) lf[task]["text_words"] = words_json(w);
  j["longform"] = lf;
  return j;
}

std::string DatasetStats::to_table() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "items %zu  scan pairs %zu  situations %zu\n", total, scan_pairs, situations);
  out << buf;
  out << "\ngroup           share\n";
  for (const char* g : {"egocentric", "allocentric", "general"}) {
    std::snprintf(buf, sizeof buf, "%-15s %6.2f%%\n", g, group_share.at(g));
    out << buf;
  }
  out << "\ntype                count   share\n";
  for (const auto& [f, n] : family_counts) {
    std::snprintf(buf, sizeof buf, "%-18s %6zu %6.2f%%\n", f.c_str(), n, family_share.at(f));
    out << buf;
  }
  out << "\nwords               mean    std\n";
  std::snprintf(buf, sizeof buf, "%-18s %6.2f %6.2f\n", "qa question", question_words.mean, question_words.std);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-18s %6.2f %6.2f\n", "qa answer", answer_words.mean, answer_words.std);
  out << buf;
  for (const auto& [task, w] : longform_query_words) {
    std::snprintf(buf, sizeof buf, "%-18s %6.2f %6.2f\n", (task + " query").c_str(), w.mean, w.std);
    out << buf;
  }
  for (const auto& [task, w] : longform_text_words) {
    std::snprintf(buf, sizeof buf, "%-18s %6.2f %6.2f\n", (task + " text").c_str(), w.mean, w.std);
    out << buf;
  }
  return out.str();
}

namespace {

template <class T>
std::vector<T> load_jsonl(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  std::vector<T> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what(), start + e.byte);
    }
    if (j.is_object() && j.contains("_meta")) continue;
    try {
      out.push_back(T::from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": malformed record: " + e.what(), start);
    }
  }
  return out;
}

std::string first_string(const nlohmann::json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (j.contains(k) && j[k].is_string()) return j[k].get<std::string>();
    if (j.contains(k) && j[k].is_number()) return j[k].dump();
  }
  return "";
}

}  // namespace

std::vector<QAItem> load_qa_jsonl(const std::filesystem::path& path) { return load_jsonl<QAItem>(path); }

std::vector<LongFormItem> load_longform_jsonl(const std::filesystem::path& path) {
  return load_jsonl<LongFormItem>(path);
}

std::vector<QAItem> load_published_qa(const std::filesystem::path& path, std::size_t* skipped) {
  const std::string text = detail::read_file(path);
  std::vector<nlohmann::json> records;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    const auto arr = detail::parse_json(text, path.string());
    for (const auto& r : arr) records.push_back(r);
  } else {
    std::istringstream in(text);
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
      const std::size_t start = offset;
      offset += line.size() + 1;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), start + e.byte);
      }
    }
  }
  std::vector<QAItem> out;
  std::size_t skip = 0;
  for (const auto& r : records) {
    if (!r.is_object()) {
      ++skip;
      continue;
    }
    const auto type = qa_type_from_label(first_string(r, {"qa_type", "type", "Type", "question_type"}));
    if (!type) {
      ++skip;
      continue;
    }
    QAItem q;
    q.qa_type = *type;
    q.scan_pair_id = first_string(r, {"scan_pair_id", "scene_pair", "scene_id", "scan_id"});
    q.situation_id = first_string(r, {"situation_id", "situation"});
    q.question = first_string(r, {"question", "Q"});
    q.answer = first_string(r, {"answer", "A"});
    q.ocot.type_tag = to_string(*type);
    out.push_back(std::move(q));
  }
  if (skipped) *skipped = skip;
  return out;
}

}  // namespace situ
