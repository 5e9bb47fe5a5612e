#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/config.hpp"
#include "situ/context.hpp"
#include "situ/geometry.hpp"
#include "situ/sampler.hpp"
#include "situ/scene.hpp"

namespace situ {

// Nine question families; the egocentric ones carry a pre (old location) / post sub-tag.
enum class QaType {
  affordance,
  attribute,
  existence,
  counting,
  warning,
  allo_relationship,
  allo_displacement,
  ego_direction_pre,
  ego_direction_post,
  ego_distance_pre,
  ego_distance_post,
};

inline constexpr QaType kAllQaTypes[] = {
    QaType::affordance,        QaType::attribute,         QaType::existence,
    QaType::counting,          QaType::warning,           QaType::allo_relationship,
    QaType::allo_displacement, QaType::ego_direction_pre, QaType::ego_direction_post,
    QaType::ego_distance_pre,  QaType::ego_distance_post,
};

std::string to_string(QaType t);
// Throws ValidationError for an unknown tag.
QaType qa_type_from_string(const std::string& s);
// Tolerant mapping for externally produced files: "Egocentric Direction Old", "Allo. Dis.", ...
std::optional<QaType> qa_type_from_label(const std::string& label);
// The nine-way family name with the pre/post sub-tag dropped ("ego_direction").
std::string family(QaType t);

enum class QaGroup { egocentric, allocentric, general };
std::string to_string(QaGroup g);
QaGroup qa_group(QaType t);

struct Ocot {
  std::vector<ObjectId> object_ids;
  std::string type_tag;
  nlohmann::ordered_json args = nlohmann::ordered_json::object();
};

struct QAItem {
  std::string item_id;  // "<situation_id>:qa:<k>"
  std::string scan_pair_id;
  std::string situation_id;
  QaType qa_type{QaType::existence};
  std::string question;
  std::string answer;
  Ocot ocot;

  nlohmann::ordered_json to_json() const;
  static QAItem from_json(const nlohmann::ordered_json& j);
};

std::vector<QAItem> generate_qa(const ScanPair& pair, const Situation& situation,
                                const ContextRecord& context, std::uint64_t rng_seed,
                                const QaConfig& cfg = {}, const GeometryConfig& geo = {});

struct Verdict {
  bool verified{false};
  std::string reason;  // "mismatch", "indeterminate", ...
};

// Recomputes the answer from geometry via (qa_type, ocot) alone. Throws ValidationError when the
// type tag is unknown.
Verdict verify_qa(const QAItem& item, const ScanPair& pair, const Situation& situation,
                  const ContextRecord& context, const QaConfig& cfg = {},
                  const GeometryConfig& geo = {});

// --- answer phrasing --------------------------------------------------------------------------

std::string number_word(int n);           // "One", "Two", ... then digits
std::string plural(const std::string& label);
// "A chair", "Two chairs and a stool"; labels in first-seen order.
std::string count_phrase(const std::vector<std::string>& labels);
// "1.6 m"
std::string meters_answer(double meters, double step);
// Accepts "1.6 m", "1.6m", "160 cm". Returns meters.
std::optional<double> parse_meters(const std::string& text);
std::size_t word_count(const std::string& text);

// --- dataset ----------------------------------------------------------------------------------

struct LongFormItem {
  std::string item_id;  // "<situation_id>:<task>:<object_id>"
  std::string scan_pair_id;
  std::string situation_id;
  ObjectId object_id{0};
  std::string task;  // "description" | "rearrangement"
  std::string query;
  std::string text;

  nlohmann::ordered_json to_json() const;
  static LongFormItem from_json(const nlohmann::ordered_json& j);
};

enum class DownsampleAxis { sample, situation, scan_pair };
std::string to_string(DownsampleAxis a);
DownsampleAxis downsample_axis_from_string(const std::string& s);

// Keys are (scan_pair_id, situation_id) per record. Returns the surviving record indices in their
// original order. Throws ValidationError for a fraction outside (0, 1] or an empty result.
std::vector<std::size_t> downsample_indices(
    const std::vector<std::pair<std::string, std::string>>& keys, DownsampleAxis axis,
    double fraction, std::uint64_t seed);

std::vector<QAItem> downsample_dataset(const std::vector<QAItem>& items, DownsampleAxis axis,
                                       double fraction, std::uint64_t seed);

struct WordStats {
  std::size_t n{0};
  double mean{0.0};
  double std{0.0};  // population
};

WordStats word_stats(const std::vector<std::string>& texts);

struct DatasetStats {
  std::size_t total{0};
  std::size_t scan_pairs{0};
  std::size_t situations{0};
  std::map<std::string, std::size_t> family_counts;  // all nine families, zero included
  std::map<std::string, std::size_t> type_counts;    // with pre/post sub-tags
  std::map<std::string, double> family_share;        // percent
  std::map<std::string, double> group_share;         // egocentric / allocentric / general, percent
  WordStats question_words;
  WordStats answer_words;
  std::map<std::string, WordStats> longform_query_words;  // by task
  std::map<std::string, WordStats> longform_text_words;

  nlohmann::ordered_json to_json() const;
  std::string to_table() const;
};

DatasetStats dataset_stats(const std::vector<QAItem>& items,
                           const std::vector<LongFormItem>& longform = {});

std::vector<QAItem> load_qa_jsonl(const std::filesystem::path& path);
std::vector<LongFormItem> load_longform_jsonl(const std::filesystem::path& path);

// Reads externally published QA files (JSON array or JSONL) leniently: the type comes from
// "qa_type"/"type"/"Type"/"question_type", the pair id from "scan_pair_id"/"scene_pair"/
// "scene_id"/"scan_id". Items with an unrecognised type are counted in `skipped`.
std::vector<QAItem> load_published_qa(const std::filesystem::path& path, std::size_t* skipped = nullptr);

}  // namespace situ
