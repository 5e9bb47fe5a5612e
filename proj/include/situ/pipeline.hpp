#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/config.hpp"
#include "situ/eval.hpp"
#include "situ/query.hpp"
#include "situ/review.hpp"
#include "situ/scene.hpp"

namespace situ {

class LlmClient;

enum class Stage { ingest, situations, context, queries, qa, stats, eval };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);
// Every stage in dependency order.
const std::vector<Stage>& all_stages();

class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::filesystem::path& path)
      : Error("missing artifact " + path.string() + " (run the stage that produces it first)"), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Files under the output directory.
struct Artifacts {
  std::filesystem::path root;

  explicit Artifacts(std::filesystem::path out) : root(std::move(out)) {}
  std::filesystem::path pairs() const { return root / "pairs.jsonl"; }
  std::filesystem::path situations() const { return root / "situations.jsonl"; }
  std::filesystem::path contexts() const { return root / "contexts.jsonl"; }
  std::filesystem::path queries(QueryTask t) const { return root / (to_string(t) + ".jsonl"); }
  std::filesystem::path review_tasks() const { return root / "review_tasks.jsonl"; }
  std::filesystem::path longform() const { return root / "longform.jsonl"; }
  std::filesystem::path qa() const { return root / "qa.jsonl"; }
  std::filesystem::path verify() const { return root / "verify.json"; }
  std::filesystem::path stats_json() const { return root / "stats.json"; }
  std::filesystem::path stats_table() const { return root / "stats.txt"; }
  std::filesystem::path eval() const { return root / "eval.json"; }
  std::filesystem::path review_log() const { return root / "review" / "decisions.jsonl"; }
};

struct RunOptions {
  std::vector<Stage> stages;
  unsigned threads{0};  // 0 picks the hardware concurrency
  // Generation client for the situation and long-form prompts; null runs template-only.
  LlmClient* llm{nullptr};
  std::optional<std::filesystem::path> predictions;  // required by eval
  Rater* rater{nullptr};                             // eval; null uses exact match
  std::map<std::string, double> human_scores;        // eval
  // Decisions used by the queries stage instead of replaying the log on disk.
  const std::map<std::string, ObjectReview>* review{nullptr};
};

struct StageReport {
  Stage stage{Stage::ingest};
  std::vector<std::filesystem::path> outputs;
  std::size_t records{0};
};

struct RunReport {
  std::vector<StageReport> stages;
  bool template_only{true};
  std::optional<double> verify_pass_rate;
};

// Runs the requested stages in dependency order. Each output starts with a
// {"_meta": {...}} line stamped with the config fingerprint; reruns are byte-identical.
RunReport run_pipeline(const PipelineConfig& cfg, const RunOptions& opts);

// Pairs recorded by the ingest stage, reloaded from their manifests.
std::vector<ScanPair> load_ingested_pairs(const PipelineConfig& cfg);

// Fixture rooms sized to give roughly ten situations per pair.
inline constexpr FixtureSpec kDatasetFixture{14, 3, {6.0, 5.0, 2.6}};

// Writes pairs "fixture_000".. from seeds base_seed.. plus an index.jsonl under `dir`.
void write_fixture_dataset(const std::filesystem::path& dir, int n_pairs, unsigned base_seed = 100,
                           const FixtureSpec& spec = kDatasetFixture);

// --- review tasks -------------------------------------------------------------------------------

struct ReviewTask {
  std::string task_id;
  std::string pair_id;
  ObjectId object_id{0};
  std::string label;
  ChangeKind change{ChangeKind::rigid};
  std::vector<FeatureCandidate> candidates;  // rejected ones removed
  std::map<std::string, std::string> rejected;
  std::optional<FeatureCandidate> resolved;
  ReviewStatus status{ReviewStatus::pending};
  int version{0};

  // Tasks the resolved feature applies to: description always, rearrangement unless the object
  // was added or removed.
  std::vector<QueryTask> query_tasks() const;
  std::string query(const ScanPair& pair, QueryTask t) const;
};

// One task per changed object, in pair then change order.
std::vector<ReviewTask> review_tasks(const ScanPair& pair, const std::map<std::string, ObjectReview>& review,
                                     const QueryConfig& qcfg = {}, const GeometryConfig& geo = {});

// `detail` adds per-candidate query previews and a top-down geometry summary of the scene.
nlohmann::ordered_json review_task_json(const ReviewTask& task, const ScanPair& pair, bool detail = true);

}  // namespace situ
