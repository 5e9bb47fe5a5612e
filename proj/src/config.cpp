#include "situ/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "situ/hash.hpp"

namespace situ {

namespace {

namespace pt = boost::property_tree;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// One visitor drives both writing and reading so the two never drift apart.
template <class Cfg, class F>
void visit(Cfg& c, F&& f) {
  f("paths", "data_root", c.paths.data_root);
  f("paths", "output_dir", c.paths.output_dir);
  f("paths", "cache_dir", c.paths.cache_dir);
  f("run", "seed", c.seed);
  f("geometry", "arm_reach_m", c.geometry.arm_reach_m);
  f("geometry", "contact_gap_m", c.geometry.contact_gap_m);
  f("geometry", "overlap_frac", c.geometry.overlap_frac);
  f("geometry", "lying_aspect", c.geometry.lying_aspect);
  f("geometry", "dominant_frac", c.geometry.dominant_frac);
  f("geometry", "corridor_width_m", c.geometry.corridor_width_m);
  f("geometry", "distance_round_m", c.geometry.distance_round_m);
  f("sampler", "seats_large_back", c.sampler.seats.large_back);
  f("sampler", "seats_small_back", c.sampler.seats.small_back);
  f("sampler", "seats_large_noback", c.sampler.seats.large_noback);
  f("sampler", "seats_small_noback", c.sampler.seats.small_noback);
  f("sampler", "payload_radius_m", c.sampler.payload_radius_m);
  f("sampler", "backrest_wall_m", c.sampler.backrest_wall_m);
  f("sampler", "frontage_min_m", c.sampler.frontage_min_m);
  f("sampler", "frontage_max_m", c.sampler.frontage_max_m);
  f("sampler", "interact_min_m", c.sampler.interact_min_m);
  f("sampler", "interact_max_m", c.sampler.interact_max_m);
  f("sampler", "interact_max_deg", c.sampler.interact_max_deg);
  f("sampler", "sitting_per_pair", c.sampler.sitting_per_pair);
  f("sampler", "standing_per_pair", c.sampler.standing_per_pair);
  f("sampler", "interacting_per_pair", c.sampler.interacting_per_pair);
  f("context", "step_m", c.context.step_m);
  f("query", "landmark_blacklist", c.query.landmark_blacklist);
  f("qa", "min_distance_m", c.qa.min_distance_m);
  f("qa", "boundary_margin_deg", c.qa.boundary_margin_deg);
  f("qa", "max_per_situation", c.qa.max_per_situation);
  f("gateway", "base_url", c.gateway.base_url);
  f("gateway", "endpoint", c.gateway.endpoint);
  f("gateway", "model", c.gateway.model);
  f("gateway", "judge_model", c.gateway.judge_model);
  f("gateway", "api_key_env", c.gateway.api_key_env);
  f("gateway", "concurrency", c.gateway.concurrency);
  f("gateway", "rate_per_s", c.gateway.rate_per_s);
  f("gateway", "max_retries", c.gateway.max_retries);
  f("gateway", "backoff_s", c.gateway.backoff_s);
  f("gateway", "timeout_s", c.gateway.timeout_s);
  f("gateway", "gen_temperature", c.gateway.gen_temperature);
  f("gateway", "judge_temperature", c.gateway.judge_temperature);
}

struct Writer {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>>* sections;
  std::vector<std::string>* order;

  void put(const char* sec, const char* key, std::string value) {
    if (!sections->count(sec)) order->push_back(sec);
    (*sections)[sec].emplace_back(key, std::move(value));
  }
  void operator()(const char* s, const char* k, const std::string& v) { put(s, k, v); }
  void operator()(const char* s, const char* k, double v) { put(s, k, format_double(v)); }
  void operator()(const char* s, const char* k, int v) { put(s, k, std::to_string(v)); }
  void operator()(const char* s, const char* k, unsigned v) { put(s, k, std::to_string(v)); }
  void operator()(const char* s, const char* k, const std::vector<std::string>& v) { put(s, k, join(v)); }
};

struct Reader {
  const pt::ptree* tree;
  std::set<std::string>* seen;

  const std::string* raw(const char* sec, const char* key) {
    const std::string path = std::string(sec) + "." + key;
    seen->insert(path);
    const auto sec_it = tree->find(sec);
    if (sec_it == tree->not_found()) return nullptr;
    const auto it = sec_it->second.find(key);
    if (it == sec_it->second.not_found()) return nullptr;
    return &it->second.data();
  }
  template <class T>
  T number(const char* sec, const char* key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
      throw ValidationError("config " + std::string(sec) + "." + key + ": not a number: " + text);
    }
    return v;
  }
  void operator()(const char* s, const char* k, std::string& v) {
    if (auto* r = raw(s, k)) v = *r;
  }
  void operator()(const char* s, const char* k, double& v) {
    if (auto* r = raw(s, k)) v = number<double>(s, k, *r);
  }
  void operator()(const char* s, const char* k, int& v) {
    if (auto* r = raw(s, k)) v = number<int>(s, k, *r);
  }
  void operator()(const char* s, const char* k, unsigned& v) {
    if (auto* r = raw(s, k)) v = number<unsigned>(s, k, *r);
  }
  void operator()(const char* s, const char* k, std::vector<std::string>& v) {
    if (auto* r = raw(s, k)) v = split_list(*r);
  }
};

void check_ranges(const PipelineConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("config: ") + what);
  };
  const auto& g = c.geometry;
  require(g.arm_reach_m > 0 && g.contact_gap_m >= 0 && g.corridor_width_m > 0, "geometry lengths must be positive");
  require(g.overlap_frac > 0 && g.overlap_frac <= 1 && g.dominant_frac > 0 && g.dominant_frac <= 1,
          "geometry fractions must lie in (0, 1]");
  require(g.distance_round_m > 0, "distance_round_m must be positive");
  const auto& s = c.sampler;
  require(s.interact_min_m > 0 && s.interact_min_m < s.interact_max_m, "interact range invalid");
  require(s.frontage_min_m > 0 && s.frontage_min_m <= s.frontage_max_m, "frontage range invalid");
  require(s.sitting_per_pair >= 0 && s.standing_per_pair >= 0 && s.interacting_per_pair >= 0,
          "per-pair counts must be non-negative");
  require(c.context.step_m > 0, "step_m must be positive");
  require(c.qa.min_distance_m >= 0 && c.qa.boundary_margin_deg >= 0 && c.qa.boundary_margin_deg < 15,
          "qa margins out of range");
  require(c.qa.max_per_situation > 0, "max_per_situation must be positive");
  require(c.gateway.concurrency >= 1 && c.gateway.rate_per_s > 0 && c.gateway.max_retries >= 0,
          "gateway limits invalid");
}

}  // namespace

std::string PipelineConfig::to_ini() const {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  std::vector<std::string> order;
  Writer w{&sections, &order};
  visit(*this, w);
  for (const auto& [label, phrase] : qa.affordances) w.put("affordance", label.c_str(), phrase);
  std::string out;
  for (const auto& name : order) {
    out += "[" + name + "]\n";
    for (const auto& [k, v] : sections[name]) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

std::string PipelineConfig::fingerprint() const {
  // Paths only decide where artifacts land, so they stay out of the hash.
  PipelineConfig copy = *this;
  copy.paths = PathsConfig{};
  return sha256_hex(copy.to_ini()).substr(0, 16);
}

PipelineConfig parse_config(const std::string& ini_text) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message() + " on line " + std::to_string(e.line()), 0);
  }
  PipelineConfig cfg;
  std::set<std::string> seen;
  Reader r{&tree, &seen};
  visit(cfg, r);
  if (auto aff = tree.get_child_optional("affordance")) {
    cfg.qa.affordances.clear();
    for (const auto& [label, node] : *aff) cfg.qa.affordances[label] = node.data();
  }
  for (const auto& [sec, node] : tree) {
    if (sec == "affordance") continue;
    for (const auto& [key, value] : node) {
      if (!seen.count(sec + "." + key)) throw ValidationError("config: unknown key " + sec + "." + key);
    }
  }
  check_ranges(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path));
}

}  // namespace situ
