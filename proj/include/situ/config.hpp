#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "situ/geometry.hpp"

namespace situ {

struct PathsConfig {
  std::string data_root{"data"};
  std::string output_dir{"out"};
  std::string cache_dir{"cache"};
};

struct SeatGroups {
  std::vector<std::string> large_back{"sofa", "couch", "bench"};
  std::vector<std::string> small_back{"armchair", "chair", "office chair"};
  std::vector<std::string> large_noback{"bed"};
  std::vector<std::string> small_noback{"stool", "beanbag", "ottoman", "pouf"};
};

struct SamplerConfig {
  SeatGroups seats;
  double payload_radius_m{4.0};
  double backrest_wall_m{0.5};
  double frontage_min_m{0.5};
  double frontage_max_m{1.0};
  double interact_min_m{0.3};
  double interact_max_m{0.5};
  double interact_max_deg{5.0};
  int sitting_per_pair{3};
  int standing_per_pair{4};
  int interacting_per_pair{3};
};

struct ContextConfig {
  double step_m{0.65};
};

struct QueryConfig {
  std::vector<std::string> landmark_blacklist{"cup", "bottle", "clutter", "item"};
};

struct QaConfig {
  // label -> purpose phrase completing "Is there something to ... in this room?"
  std::map<std::string, std::string> affordances{
      {"clothes dryer", "hang clothes on"},
      {"blanket", "keep warm while sleeping"},
      {"ottoman", "rest feet on"},
      {"bed", "sleep on"},
      {"sofa", "lie down on"},
      {"chair", "sit on"},
      {"armchair", "sit on"},
      {"stool", "sit on"},
      {"table", "put things on"},
      {"desk", "work at"},
      {"wardrobe", "store clothes in"},
      {"cabinet", "store things in"},
      {"shelf", "put books on"},
      {"trash can", "throw rubbish in"},
      {"lamp", "light the room"},
      {"kitchen counter", "prepare food on"},
  };
  double min_distance_m{0.1};
  // Angular margin (degrees) an object must keep from a clock-hour or bucket boundary before
  // direction/counting questions are asked about it.
  double boundary_margin_deg{2.0};
  int max_per_situation{15};
};

struct GatewayConfig {
  std::string base_url{"https://api.openai.com"};
  std::string endpoint{"/v1/chat/completions"};
  std::string model{"gpt-4o-2024-08-06"};
  std::string judge_model{"gpt-4o-2024-08-06"};
  std::string api_key_env{"SITU_API_KEY"};
  int concurrency{4};
  double rate_per_s{2.0};
  int max_retries{3};
  double backoff_s{0.5};
  double timeout_s{60.0};
  double gen_temperature{0.7};
  double judge_temperature{0.0};
};

struct PipelineConfig {
  PathsConfig paths;
  GeometryConfig geometry;
  SamplerConfig sampler;
  ContextConfig context;
  QueryConfig query;
  QaConfig qa;
  GatewayConfig gateway;
  unsigned seed{2025};

  // Canonical INI text; the fingerprint hashes it.
  std::string to_ini() const;
  std::string fingerprint() const;
};

// Unknown sections/keys are errors so typos never pass silently.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& ini_text);

}  // namespace situ
