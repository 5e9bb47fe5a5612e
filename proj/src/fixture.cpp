#include <algorithm>
#include <random>

#include "situ/geometry.hpp"
#include "situ/scene.hpp"

namespace situ {

namespace {

enum class Samples { none, front_face, seat_backrest };

struct Template {
  const char* label;
  Vec3 half;
  bool wall_backed;
  Samples samples;
  bool support;
  double weight;
};

// Object front is local +x; wall-backed objects put local -x against a wall.
const std::vector<Template>& floor_catalog() {
  static const std::vector<Template> cat = {
      {"sofa", {0.45, 1.0, 0.4}, true, Samples::seat_backrest, false, 1.0},
      {"armchair", {0.4, 0.4, 0.45}, false, Samples::seat_backrest, false, 1.0},
      {"chair", {0.25, 0.25, 0.45}, false, Samples::seat_backrest, false, 3.0},
      {"stool", {0.2, 0.2, 0.25}, false, Samples::none, false, 0.7},
      {"bed", {1.0, 0.8, 0.3}, true, Samples::none, true, 0.7},
      {"table", {0.6, 0.4, 0.38}, false, Samples::none, true, 2.0},
      {"desk", {0.35, 0.7, 0.38}, true, Samples::front_face, true, 1.0},
      {"cabinet", {0.25, 0.5, 0.45}, true, Samples::front_face, true, 1.0},
      {"kitchen counter", {0.3, 0.9, 0.45}, true, Samples::front_face, true, 0.7},
      {"wardrobe", {0.3, 0.6, 1.0}, true, Samples::front_face, false, 0.8},
      {"shelf", {0.2, 0.5, 0.9}, true, Samples::front_face, false, 0.8},
      {"nightstand", {0.2, 0.2, 0.3}, false, Samples::front_face, true, 1.0},
      {"plant", {0.15, 0.15, 0.5}, false, Samples::none, false, 1.0},
      {"trash can", {0.15, 0.15, 0.2}, false, Samples::none, false, 0.8},
  };
  return cat;
}

const std::vector<Template>& top_catalog() {
  static const std::vector<Template> cat = {
      {"cup", {0.04, 0.04, 0.06}, false, Samples::none, false, 1.0},
      {"monitor", {0.05, 0.25, 0.2}, false, Samples::none, false, 1.0},
      {"book", {0.1, 0.15, 0.02}, false, Samples::none, false, 1.0},
      {"lamp", {0.1, 0.1, 0.2}, false, Samples::none, false, 1.0},
  };
  return cat;
}

const std::vector<std::pair<Facet, std::vector<const char*>>>& attribute_pools() {
  static const std::vector<std::pair<Facet, std::vector<const char*>>> pools = {
      {Facet::color, {"white", "black", "gray", "brown", "blue", "red", "green", "orange", "beige"}},
      {Facet::material, {"wooden", "metal", "plastic", "fabric", "glass"}},
      {Facet::shape, {"rectangular", "round", "square"}},
      {Facet::size, {"big", "small", "tall", "low", "wide"}},
      {Facet::state, {"messy", "tidy", "open", "closed"}},
  };
  return pools;
}

class Generator {
 public:
  Generator(unsigned seed, const FixtureSpec& spec) : rng_(seed), spec_(spec) {}

  ScanPair run(const std::string& pair_id);

 private:
  double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  bool coin(double p) { return uni(0.0, 1.0) < p; }

  const Template& pick_weighted(const std::vector<Template>& cat);
  std::vector<Attribute> random_attributes();
  std::vector<SurfaceSample> make_samples(const Obb& box, Samples kind);
  bool inside_room(const Obb& box) const;
  bool clear_of(const Obb& box, const std::vector<ObjectInstance>& others, ObjectId skip) const;
  std::optional<Obb> place_floor(const Template& t, const std::vector<ObjectInstance>& placed);
  std::optional<Obb> place_on(const Template& t, const ObjectInstance& support,
                              const std::vector<ObjectInstance>& placed, ObjectId skip);
  std::vector<ObjectInstance> walls() const;

  std::mt19937 rng_;
  FixtureSpec spec_;
};

const Template& Generator::pick_weighted(const std::vector<Template>& cat) {
  std::vector<double> w;
  for (const auto& t : cat) w.push_back(t.weight);
  std::discrete_distribution<int> d(w.begin(), w.end());
  return cat[static_cast<std::size_t>(d(rng_))];
}

std::vector<Attribute> Generator::random_attributes() {
  static const double kProb[] = {0.7, 0.5, 0.3, 0.3, 0.3};
  std::vector<Attribute> out;
  std::size_t i = 0;
  for (const auto& [facet, values] : attribute_pools()) {
    if (coin(kProb[i++])) {
      const int n = static_cast<int>(values.size());
      const int first = pick(n);
      out.push_back({facet, values[static_cast<std::size_t>(first)]});
      if (facet == Facet::color && coin(0.2)) {
        out.push_back({facet, values[static_cast<std::size_t>((first + 1 + pick(n - 1)) % n)]});
      }
    }
  }
  return out;
}

std::vector<SurfaceSample> Generator::make_samples(const Obb& box, Samples kind) {
  std::vector<SurfaceSample> out;
  if (kind == Samples::none) return out;
  const Vec3 h = box.half_extents;
  const int n_face = kind == Samples::front_face ? 24 : 14;
  const int n_top = 40 - n_face;
  auto emit = [&](Vec2 local, double z, Vec2 local_normal, double nz) {
    const Vec2 p = xy(box.center) + rotate(local, box.yaw);
    const Vec2 n = rotate(local_normal, box.yaw);
    out.push_back({{p.x, p.y, z}, {n.x, n.y, nz}});
  };
  for (int i = 0; i < n_face; ++i) {
    // Front face for furniture, the backrest's seat-facing side for seats.
    const double x = kind == Samples::front_face ? h.x : -h.x * 0.6;
    emit({x, uni(-h.y, h.y)}, box.center.z + uni(-h.z, h.z), {1.0, 0.0}, 0.0);
  }
  for (int i = 0; i < n_top; ++i) {
    emit({uni(-h.x, h.x), uni(-h.y, h.y)}, box.top(), {0.0, 0.0}, 1.0);
  }
  return out;
}

bool Generator::inside_room(const Obb& box) const {
  for (const auto& p : footprint(box)) {
    if (p.x < 0.0 || p.y < 0.0 || p.x > spec_.room_extents.x || p.y > spec_.room_extents.y) {
      return false;
    }
  }
  return true;
}

bool Generator::clear_of(const Obb& box, const std::vector<ObjectInstance>& others,
                         ObjectId skip) const {
  const Polygon fp = footprint(box);
  for (const auto& o : others) {
    if (o.id == skip || o.label == "wall" || !blocks_floor(o, 0.0)) continue;
    if (convex_distance(fp, footprint(o.obb)) < 0.35) return false;
  }
  return true;
}

std::optional<Obb> Generator::place_floor(const Template& t,
                                          const std::vector<ObjectInstance>& placed) {
  const Vec3 half{t.half.x * uni(0.85, 1.15), t.half.y * uni(0.85, 1.15),
                  t.half.z * uni(0.9, 1.1)};
  const double W = spec_.room_extents.x;
  const double D = spec_.room_extents.y;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Obb box;
    box.half_extents = half;
    box.center.z = half.z;
    if (t.wall_backed) {
      const int side = pick(4);
      const double gap = 0.02 + half.x;
      switch (side) {
        case 0: box.yaw = 0.0; box.center.x = gap; box.center.y = uni(0.0, D); break;
        case 1: box.yaw = kPi; box.center.x = W - gap; box.center.y = uni(0.0, D); break;
        case 2: box.yaw = kPi / 2; box.center.y = gap; box.center.x = uni(0.0, W); break;
        default: box.yaw = -kPi / 2; box.center.y = D - gap; box.center.x = uni(0.0, W); break;
      }
    } else {
      box.yaw = wrap_pi(uni(0.0, 2.0 * kPi));
      box.center.x = uni(0.0, W);
      box.center.y = uni(0.0, D);
    }
    if (inside_room(box) && clear_of(box, placed, 0)) return box;
  }
  return std::nullopt;
}

std::optional<Obb> Generator::place_on(const Template& t, const ObjectInstance& support,
                                       const std::vector<ObjectInstance>& placed, ObjectId skip) {
  const Vec3 half{t.half.x * uni(0.9, 1.1), t.half.y * uni(0.9, 1.1), t.half.z * uni(0.9, 1.1)};
  const Vec3 sh = support.obb.half_extents;
  if (sh.x < half.x + 0.02 || sh.y < half.y + 0.02) return std::nullopt;
  for (int attempt = 0; attempt < 50; ++attempt) {
    const Vec2 local{uni(-sh.x + half.x, sh.x - half.x), uni(-sh.y + half.y, sh.y - half.y)};
    const Vec2 c = xy(support.obb.center) + rotate(local, support.obb.yaw);
    Obb box{{c.x, c.y, support.obb.top() + half.z}, half, support.obb.yaw};
    const Polygon fp = footprint(box);
    bool ok = true;
    for (const auto& o : placed) {
      if (o.id == skip || o.id == support.id || blocks_floor(o, 0.0)) continue;
      if (convex_distance(fp, footprint(o.obb)) < 0.05) ok = false;
    }
    if (ok) return box;
  }
  return std::nullopt;
}

std::vector<ObjectInstance> Generator::walls() const {
  const double W = spec_.room_extents.x;
  const double D = spec_.room_extents.y;
  const double H = spec_.room_extents.z;
  auto wall = [&](ObjectId id, Vec3 c, Vec3 h) {
    ObjectInstance o;
    o.id = id;
    o.label = "wall";
    o.obb = {c, h, 0.0};
    return o;
  };
  return {wall(1, {-0.05, D / 2, H / 2}, {0.05, D / 2 + 0.1, H / 2}),
          wall(2, {W + 0.05, D / 2, H / 2}, {0.05, D / 2 + 0.1, H / 2}),
          wall(3, {W / 2, -0.05, H / 2}, {W / 2 + 0.1, 0.05, H / 2}),
          wall(4, {W / 2, D + 0.05, H / 2}, {W / 2 + 0.1, 0.05, H / 2})};
}

ScanPair Generator::run(const std::string& pair_id) {
  if (spec_.n_objects < 1) throw Error("fixture needs at least one object");
  if (spec_.n_changes < 0 || spec_.n_changes > spec_.n_objects) {
    throw Error("fixture n_changes must lie in [0, n_objects]");
  }
  if (!(spec_.room_extents.x > 0 && spec_.room_extents.y > 0 && spec_.room_extents.z > 0)) {
    throw Error("fixture room extents must be positive");
  }

  // World objects in curr coordinates before any change is applied.
  std::vector<ObjectInstance> world = walls();
  std::vector<Samples> kinds(world.size(), Samples::none);
  std::vector<bool> is_support(world.size(), false);
  std::vector<int> on_top_of(world.size(), -1);  // index of support
  ObjectId next_id = 5;
  for (int i = 0; i < spec_.n_objects; ++i) {
    std::vector<std::size_t> supports;
    for (std::size_t k = 0; k < world.size(); ++k) {
      if (is_support[k]) supports.push_back(k);
    }
    ObjectInstance o;
    o.id = next_id++;
    o.attributes = random_attributes();
    bool placed = false;
    if (!supports.empty() && coin(0.25)) {
      const auto& t = pick_weighted(top_catalog());
      const std::size_t s = supports[static_cast<std::size_t>(pick(static_cast<int>(supports.size())))];
      if (auto box = place_on(t, world[s], world, 0)) {
        o.label = t.label;
        o.obb = *box;
        kinds.push_back(Samples::none);
        is_support.push_back(false);
        on_top_of.push_back(static_cast<int>(s));
        placed = true;
      }
    }
    if (!placed) {
      // Fall back to other (usually smaller) furniture before giving up on the room.
      std::vector<Template> options = floor_catalog();
      const Template* chosen = nullptr;
      std::optional<Obb> box;
      while (!box && !options.empty()) {
        const Template& t = pick_weighted(options);
        box = place_floor(t, world);
        if (box) {
          chosen = &t;
          break;
        }
        options.erase(options.begin() + (&t - options.data()));
      }
      if (!box) {
        throw InfeasibleFixture("cannot place object " + std::to_string(i + 1) +
                                " without overlap after 1000 attempts");
      }
      const Template& t = *chosen;
      o.label = t.label;
      o.obb = *box;
      kinds.push_back(t.samples);
      is_support.push_back(t.support);
      on_top_of.push_back(-1);
    }
    world.push_back(std::move(o));
  }
  for (std::size_t k = 0; k < world.size(); ++k) {
    world[k].samples = make_samples(world[k].obb, kinds[k]);
  }

  // Pick changed objects: objects nothing rests on first.
  std::vector<std::size_t> free_idx, loaded_idx;
  for (std::size_t k = 4; k < world.size(); ++k) {
    const bool loaded = std::find(on_top_of.begin(), on_top_of.end(), static_cast<int>(k)) !=
                        on_top_of.end();
    (loaded ? loaded_idx : free_idx).push_back(k);
  }
  std::shuffle(free_idx.begin(), free_idx.end(), rng_);
  std::shuffle(loaded_idx.begin(), loaded_idx.end(), rng_);
  std::vector<std::size_t> order = free_idx;
  order.insert(order.end(), loaded_idx.begin(), loaded_idx.end());
  order.resize(static_cast<std::size_t>(spec_.n_changes));

  static const ChangeKind kCycle[] = {ChangeKind::rigid, ChangeKind::removed, ChangeKind::rigid,
                                      ChangeKind::added, ChangeKind::nonrigid};
  std::vector<ObjectInstance> curr = world;
  std::vector<ObjectInstance> prev_world = world;
  std::vector<ChangeRecord> changes;
  std::vector<ObjectId> only_prev, only_curr;
  for (std::size_t c = 0; c < order.size(); ++c) {
    const std::size_t k = order[c];
    const bool loaded = std::find(loaded_idx.begin(), loaded_idx.end(), k) != loaded_idx.end();
    ChangeKind kind = loaded ? ChangeKind::nonrigid : kCycle[c % 5];
    const ObjectId id = world[k].id;
    ChangeRecord rec;
    if (kind == ChangeKind::rigid) {
      std::optional<Obb> moved;
      const Obb& old = world[k].obb;
      if (on_top_of[k] >= 0) {
        std::vector<std::size_t> supports;
        for (std::size_t s = 0; s < world.size(); ++s) {
          if (is_support[s] && std::find(only_prev.begin(), only_prev.end(), world[s].id) == only_prev.end()) {
            supports.push_back(s);
          }
        }
        for (int attempt = 0; attempt < 20 && !moved && !supports.empty(); ++attempt) {
          const auto s = supports[static_cast<std::size_t>(pick(static_cast<int>(supports.size())))];
          const auto* tmpl = &top_catalog().front();
          for (const auto& t : top_catalog()) {
            if (world[k].label == t.label) tmpl = &t;
          }
          Template t = *tmpl;
          t.half = old.half_extents;
          if (auto box = place_on(t, curr[s], curr, id)) {
            box->half_extents = old.half_extents;
            box->center.z = curr[s].obb.top() + old.half_extents.z;
            if ((xy(box->center) - xy(old.center)).norm() > 0.1) moved = box;
          }
        }
      } else {
        for (int attempt = 0; attempt < 300 && !moved; ++attempt) {
          Obb box = old;
          if (kinds[k] == Samples::front_face || (world[k].label == std::string("sofa")) ||
              world[k].label == std::string("bed") || world[k].label == std::string("wardrobe") ||
              world[k].label == std::string("shelf")) {
            const Vec2 along = rotate({0.0, 1.0}, old.yaw);
            const double d = (coin(0.5) ? 1.0 : -1.0) * uni(0.4, 1.5);
            box.center = box.center + Vec3{d * along.x, d * along.y, 0.0};
          } else {
            const double ang = uni(0.0, 2.0 * kPi);
            const double d = uni(0.4, 1.6);
            box.center = box.center + Vec3{d * std::cos(ang), d * std::sin(ang), 0.0};
            box.yaw = wrap_pi(box.yaw + uni(-0.5, 0.5));
          }
          if (inside_room(box) && clear_of(box, curr, id)) moved = box;
        }
      }
      if (moved) {
        auto& obj = curr[k];
        const Obb before = obj.obb;
        obj.obb = *moved;
        obj.samples = make_samples(obj.obb, kinds[k]);
        rec.rigid_transform = RigidMotion{wrap_pi(moved->yaw - before.yaw),
                                          moved->center - before.center};
      } else {
        kind = ChangeKind::nonrigid;
      }
    }
    rec.kind = kind;
    switch (kind) {
      case ChangeKind::rigid:
      case ChangeKind::nonrigid:
        rec.object_id_prev = id;
        rec.object_id_curr = id;
        break;
      case ChangeKind::removed:
        rec.object_id_prev = id;
        only_prev.push_back(id);
        break;
      case ChangeKind::added:
        rec.object_id_curr = id;
        only_curr.push_back(id);
        break;
    }
    if (kind == ChangeKind::nonrigid) {
      auto& attrs = curr[k].attributes;
      std::erase_if(attrs, [](const Attribute& a) { return a.facet == Facet::state; });
      attrs.push_back({Facet::state, coin(0.5) ? "folded" : "deformed"});
    }
    changes.push_back(std::move(rec));
  }

  const Alignment align{wrap_pi(uni(-kPi, kPi)), {uni(-2.0, 2.0), uni(-2.0, 2.0), 0.0}};
  const Alignment to_prev = align.inverse();

  ScanPair pair;
  pair.pair_id = pair_id;
  pair.alignment = align;
  pair.changes = std::move(changes);
  pair.curr.scan_id = pair_id + "_curr";
  pair.prev.scan_id = pair_id + "_prev";
  for (const auto& o : curr) {
    if (std::find(only_prev.begin(), only_prev.end(), o.id) == only_prev.end()) {
      pair.curr.objects.push_back(o);
    }
  }
  for (const auto& o : prev_world) {
    if (std::find(only_curr.begin(), only_curr.end(), o.id) != only_curr.end()) continue;
    ObjectInstance p = o;
    p.obb = to_prev.apply(o.obb);
    for (auto& s : p.samples) {
      s.point = to_prev.apply(s.point);
      const Vec2 n = rotate(xy(s.normal), to_prev.yaw);
      s.normal = {n.x, n.y, s.normal.z};
    }
    pair.prev.objects.push_back(std::move(p));
  }
  const double W = spec_.room_extents.x;
  const double D = spec_.room_extents.y;
  const std::vector<Vec2> room = {{0, 0}, {W, 0}, {W, D}, {0, D}};
  std::vector<Vec2> room_prev;
  for (const auto& p : room) room_prev.push_back(xy(to_prev.apply(Vec3{p.x, p.y, 0.0})));
  pair.curr.standable = compute_standable(pair.curr.objects, 0.0, room, 0.2);
  pair.prev.standable = compute_standable(pair.prev.objects, 0.0, room_prev, 0.2);
  for (auto* scan : {&pair.prev, &pair.curr}) {
    for (const auto& o : scan->objects) {
      if (o.label == "wall") scan->walls.push_back(o.id);
    }
  }
  return pair;
}

}  // namespace

ScanPair make_fixture(unsigned seed, const FixtureSpec& spec, const std::string& pair_id) {
  Generator gen(seed, spec);
  return gen.run(pair_id.empty() ? "fixture_" + std::to_string(seed) : pair_id);
}

}  // namespace situ
