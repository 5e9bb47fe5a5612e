#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/qa.hpp"

namespace situ {

// Revised REL: 1 when both are zero, 0 when only the truth is zero, else 1 - min(1, |p - g| / g).
double rel_score(double d_gt, double d_pred);

// Mean of (s - 1) / 4 as a percentage; ratings must be integers in [1, 5].
double correctness_score(const std::vector<int>& ratings);

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(const std::vector<double>& v);
// Throws ValidationError on length mismatch, fewer than two values, or a constant vector.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Lowercase, ASCII punctuation removed, whitespace split.
std::vector<std::string> tokenize(const std::string& text);

struct TextScores {
  double bleu4{0.0};
  double rougeL{0.0};
  double cider{0.0};
};

// Corpus BLEU-4 over tokenized sentences: clipped n-gram counts and per-sentence denominators
// pooled across the corpus, closest-reference brevity penalty, uniform weights, no smoothing.
double corpus_bleu4(const std::vector<std::vector<std::string>>& hyps,
                    const std::vector<std::vector<std::vector<std::string>>>& refs);

// ROUGE-L F-measure (beta 1.2) of one hypothesis against its best-matching references.
double rouge_l(const std::vector<std::string>& hyp, const std::vector<std::vector<std::string>>& refs);

// CIDEr-D per item (n = 4, sigma = 6, x10) with document frequencies over the given references.
std::vector<double> cider_d(const std::vector<std::vector<std::string>>& hyps,
                            const std::vector<std::vector<std::vector<std::string>>>& refs);

// Corpus-level scores: BLEU-4 over the corpus, ROUGE-L and CIDEr-D averaged over items.
TextScores corpus_text_overlap(const std::vector<std::string>& hyps,
                               const std::vector<std::vector<std::string>>& refs);

// Single-item convenience; CIDEr-D has no document frequencies to work with and scores 0.
TextScores text_overlap(const std::string& hyp, const std::vector<std::string>& refs);

// --- raters -----------------------------------------------------------------------------------

enum class Rubric { general, direction, longform };
std::string to_string(Rubric r);

struct RatingRequest {
  Rubric rubric{Rubric::general};
  std::string question;
  std::string reference;
  std::string response;
};

class Rater {
 public:
  virtual ~Rater() = default;
  virtual int rate(const RatingRequest& req) = 0;
  // Recorded in every report so the judge behind the numbers is explicit.
  virtual std::string id() const = 0;
  // Default runs `rate` sequentially.
  virtual std::vector<int> rate_all(const std::vector<RatingRequest>& reqs);
};

// 5 when canonical answers agree, else 1.
class ExactMatchRater : public Rater {
 public:
  int rate(const RatingRequest& req) override;
  std::string id() const override { return "exact_match"; }
};

// Lowercased, trimmed, trailing period dropped, spelled-out clock hours turned into digits.
std::string canonical_answer(const std::string& text);

// --- run evaluation ---------------------------------------------------------------------------

struct Prediction {
  std::string item_id;
  std::string response;
};

std::vector<Prediction> load_predictions(const std::filesystem::path& path);

struct EvalReport {
  std::map<std::string, double> correctness;  // per judged QA family, plus "overall"
  std::map<std::string, double> rel;          // per distance family
  std::map<std::string, TextScores> text;     // per long-form task
  std::map<std::string, double> longform_correctness;
  std::map<std::string, std::size_t> counts;  // items per family / task
  std::size_t unanswered{0};
  std::size_t unparseable{0};
  std::optional<double> spearman;
  std::string rater;
  std::string config_fingerprint;

  nlohmann::ordered_json to_json() const;
  std::string to_table() const;
};

// Scores every dataset item; items without a prediction get the minimum. Throws ValidationError
// for predictions naming unknown items. `human_scores` (item id -> rating) enables the rank
// correlation with the rater's scores.
EvalReport evaluate_run(const std::vector<Prediction>& predictions, const std::vector<QAItem>& qa,
                        const std::vector<LongFormItem>& longform, Rater& rater,
                        const std::map<std::string, double>& human_scores = {},
                        const std::string& config_fingerprint = "");

}  // namespace situ
