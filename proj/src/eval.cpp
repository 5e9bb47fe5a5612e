#include "situ/eval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace situ {

using nlohmann::ordered_json;

double rel_score(double d_gt, double d_pred) {
  if (!std::isfinite(d_gt) || !std::isfinite(d_pred) || d_gt < 0 || d_pred < 0) {
    throw ValidationError("rel_score needs finite non-negative distances");
  }
  if (d_gt == 0.0) return d_pred == 0.0 ? 1.0 : 0.0;
  return 1.0 - std::min(1.0, std::abs(d_pred - d_gt) / d_gt);
}

double correctness_score(const std::vector<int>& ratings) {
  if (ratings.empty()) throw ValidationError("correctness_score needs at least one rating");
  long sum = 0;
  for (int s : ratings) {
    if (s < 1 || s > 5) throw ValidationError("rating out of range: " + std::to_string(s));
    sum += s - 1;
  }
  return static_cast<double>(sum) * 100.0 / (4.0 * static_cast<double>(ratings.size()));
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("spearman: length mismatch");
  if (a.size() < 2) throw ValidationError("spearman: need at least two values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw ValidationError("spearman: undefined for a constant vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::string clean;
  clean.reserve(text.size());
  for (unsigned char c : text) {
    if (c < 128 && std::ispunct(c)) continue;
    clean += static_cast<char>(c < 128 ? std::tolower(c) : c);
  }
  std::istringstream in(clean);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + n))];
  return out;
}

NgramCounts all_ngrams(const Tokens& t, std::size_t max_n) {
  NgramCounts out;
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (auto& [g, c] : ngrams(t, n)) out[g] += c;
  }
  return out;
}

std::size_t lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double corpus_bleu4(const std::vector<Tokens>& hyps, const std::vector<std::vector<Tokens>>& refs) {
  if (hyps.size() != refs.size()) throw ValidationError("bleu: hypothesis/reference count mismatch");
  long num[4] = {0, 0, 0, 0};
  long den[4] = {0, 0, 0, 0};
  long hyp_len = 0;
  long ref_len = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s];
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hc = ngrams(h, n);
      std::map<Tokens, int> max_ref;
      for (const auto& r : refs[s]) {
        for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      }
      long clipped = 0;
      long total = 0;
      for (const auto& [g, c] : hc) {
        total += c;
        auto it = max_ref.find(g);
        clipped += std::min<long>(c, it == max_ref.end() ? 0 : it->second);
      }
      num[n - 1] += clipped;
      den[n - 1] += std::max<long>(1, total);
    }
    const long hl = static_cast<long>(h.size());
    hyp_len += hl;
    long best = -1;
    for (const auto& r : refs[s]) {
      const long rl = static_cast<long>(r.size());
      if (best < 0 || std::abs(rl - hl) < std::abs(best - hl) ||
          (std::abs(rl - hl) == std::abs(best - hl) && rl < best)) {
        best = rl;
      }
    }
    ref_len += std::max<long>(best, 0);
  }
  for (long n : num) {
    if (n == 0) return 0.0;
  }
  double log_p = 0.0;
  for (int i = 0; i < 4; ++i) log_p += 0.25 * std::log(static_cast<double>(num[i]) / static_cast<double>(den[i]));
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_p);
}

double rouge_l(const Tokens& hyp, const std::vector<Tokens>& refs) {
  if (hyp.empty() || refs.empty()) return 0.0;
  constexpr double beta = 1.2;
  double p_max = 0.0;
  double r_max = 0.0;
  for (const auto& r : refs) {
    if (r.empty()) continue;
    const double l = static_cast<double>(lcs(r, hyp));
    p_max = std::max(p_max, l / static_cast<double>(hyp.size()));
    r_max = std::max(r_max, l / static_cast<double>(r.size()));
  }
  if (p_max == 0.0 || r_max == 0.0) return 0.0;
  return ((1 + beta * beta) * p_max * r_max) / (r_max + beta * beta * p_max);
}

std::vector<double> cider_d(const std::vector<Tokens>& hyps, const std::vector<std::vector<Tokens>>& refs) {
  if (hyps.size() != refs.size()) throw ValidationError("cider: hypothesis/reference count mismatch");
  constexpr std::size_t kN = 4;
  constexpr double kSigma = 6.0;
  std::map<Tokens, double> df;
  std::vector<std::vector<NgramCounts>> ref_counts(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::set<Tokens> seen;
    for (const auto& r : refs[i]) {
      ref_counts[i].push_back(all_ngrams(r, kN));
      for (const auto& [g, c] : ref_counts[i].back()) seen.insert(g);
    }
    for (const auto& g : seen) df[g] += 1.0;
  }
  const double log_ref_len = std::log(static_cast<double>(refs.size()));

  struct Vec {
    std::vector<std::map<Tokens, double>> v = std::vector<std::map<Tokens, double>>(kN);
    double norm[kN] = {0, 0, 0, 0};
    long length = 0;  // bigram count, as in the reference implementation
  };
  auto to_vec = [&](const NgramCounts& counts) {
    Vec out;
    for (const auto& [g, tf] : counts) {
      auto it = df.find(g);
      const double d = std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
      const std::size_t n = g.size() - 1;
      const double w = static_cast<double>(tf) * (log_ref_len - d);
      out.v[n][g] = w;
      out.norm[n] += w * w;
      if (n == 1) out.length += tf;
    }
    for (double& x : out.norm) x = std::sqrt(x);
    return out;
  };
  auto sim = [&](const Vec& h, const Vec& r) {
    const double delta = static_cast<double>(h.length - r.length);
    std::array<double, kN> val{};
    for (std::size_t n = 0; n < kN; ++n) {
      for (const auto& [g, w] : h.v[n]) {
        auto it = r.v[n].find(g);
        const double rw = it == r.v[n].end() ? 0.0 : it->second;
        val[n] += std::min(w, rw) * rw;
      }
      if (h.norm[n] != 0 && r.norm[n] != 0) val[n] /= h.norm[n] * r.norm[n];
      val[n] *= std::exp(-(delta * delta) / (2 * kSigma * kSigma));
    }
    return val;
  };

  std::vector<double> scores;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (refs[i].empty()) {
      scores.push_back(0.0);
      continue;
    }
    const Vec h = to_vec(all_ngrams(hyps[i], kN));
    double total[kN] = {0, 0, 0, 0};
    for (const auto& rc : ref_counts[i]) {
      const auto s = sim(h, to_vec(rc));
      for (std::size_t n = 0; n < kN; ++n) total[n] += s[n];
    }
    double mean = 0.0;
    for (double t : total) mean += t;
    mean /= kN;
    scores.push_back(mean / static_cast<double>(refs[i].size()) * 10.0);
  }
  return scores;
}

TextScores corpus_text_overlap(const std::vector<std::string>& hyps,
                               const std::vector<std::vector<std::string>>& refs) {
  if (hyps.size() != refs.size()) throw ValidationError("text overlap: hypothesis/reference count mismatch");
  TextScores out;
  if (hyps.empty()) return out;
  std::vector<Tokens> h;
  std::vector<std::vector<Tokens>> r;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (refs[i].empty()) throw ValidationError("text overlap: item without references");
    h.push_back(tokenize(hyps[i]));
    r.emplace_back();
    for (const auto& ref : refs[i]) r.back().push_back(tokenize(ref));
  }
  out.bleu4 = corpus_bleu4(h, r);
  double rouge = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) rouge += rouge_l(h[i], r[i]);
  out.rougeL = rouge / static_cast<double>(h.size());
  const auto c = cider_d(h, r);
  out.cider = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
  return out;
}

TextScores text_overlap(const std::string& hyp, const std::vector<std::string>& refs) {
  return corpus_text_overlap({hyp}, {refs});
}

// --- raters -----------------------------------------------------------------------------------

std::string to_string(Rubric r) {
  switch (r) {
    case Rubric::general: return "general";
    case Rubric::direction: return "direction";
    case Rubric::longform: return "longform";
  }
  return "general";
}

std::vector<int> Rater::rate_all(const std::vector<RatingRequest>& reqs) {
  std::vector<int> out;
  out.reserve(reqs.size());
  for (const auto& r : reqs) out.push_back(rate(r));
  return out;
}

std::string canonical_answer(const std::string& text) {
  std::string s;
  for (unsigned char c : text) s += static_cast<char>(std::tolower(c));
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  s = s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
  while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
  static const char* kHours[] = {"one", "two", "three", "four",  "five",   "six",
                                 "seven", "eight", "nine", "ten", "eleven", "twelve"};
  for (int h = 12; h >= 1; --h) {
    const std::string word = std::string(kHours[h - 1]) + " o'clock";
    if (auto pos = s.find(word); pos != std::string::npos && (pos == 0 || s[pos - 1] == ' ')) {
      s.replace(pos, std::string(kHours[h - 1]).size(), std::to_string(h));
    }
  }
  return s;
}

int ExactMatchRater::rate(const RatingRequest& req) {
  return canonical_answer(req.response) == canonical_answer(req.reference) ? 5 : 1;
}

// --- run evaluation ---------------------------------------------------------------------------

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  std::vector<Prediction> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what(), start + e.byte);
    }
    if (!j.is_object() || !j.contains("item_id") || !j["item_id"].is_string()) {
      throw ParseError(path.string() + ": prediction needs a string item_id", start);
    }
    out.push_back({j["item_id"].get<std::string>(),
                   j.contains("response") && j["response"].is_string() ? j["response"].get<std::string>() : ""});
  }
  return out;
}

namespace {

bool is_distance(QaType t) {
  return t == QaType::ego_distance_pre || t == QaType::ego_distance_post || t == QaType::allo_displacement;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

// First number with a length unit anywhere in a free-form answer.
std::optional<double> find_meters(const std::string& text) {
  if (auto exact = parse_meters(text)) return exact;
  static const std::regex re(R"((-?[0-9]+(?:\.[0-9]+)?)\s*(centimeters?|centimetres?|cm|meters?|metres?|m)\b)",
                             std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return parse_meters(m[1].str() + " " + m[2].str());
}

}  // namespace

EvalReport evaluate_run(const std::vector<Prediction>& predictions, const std::vector<QAItem>& qa,
                        const std::vector<LongFormItem>& longform, Rater& rater,
                        const std::map<std::string, double>& human_scores,
                        const std::string& config_fingerprint) {
  std::map<std::string, std::string> response;
  std::set<std::string> known;
  for (const auto& q : qa) known.insert(q.item_id);
  for (const auto& l : longform) known.insert(l.item_id);
  for (const auto& p : predictions) {
    if (!known.count(p.item_id)) throw ValidationError("prediction for unknown item " + p.item_id);
    response[p.item_id] = p.response;
  }
  auto answer_of = [&](const std::string& id) -> std::string {
    auto it = response.find(id);
    return it == response.end() ? "" : it->second;
  };

  EvalReport rep;
  rep.rater = rater.id();
  rep.config_fingerprint = config_fingerprint;

  // Judged QA items, collected so the rater can work on them as a batch.
  std::vector<RatingRequest> requests;
  std::vector<std::string> request_ids;
  std::vector<std::string> request_group;
  std::vector<int> fixed;  // 0 = ask rater, else pre-set minimum
  std::map<std::string, std::vector<double>> rel_by_family;

  for (const auto& q : qa) {
    const std::string fam = family(q.qa_type);
    ++rep.counts[fam];
    const std::string resp = answer_of(q.item_id);
    if (blank(resp)) ++rep.unanswered;
    if (is_distance(q.qa_type)) {
      const auto gt = parse_meters(q.answer);
      if (!gt) throw ValidationError("dataset item " + q.item_id + " has a non-numeric answer");
      const auto pred = blank(resp) ? std::nullopt : find_meters(resp);
      if (!pred && !blank(resp)) ++rep.unparseable;
      rel_by_family[fam].push_back(pred && *pred >= 0 ? rel_score(*gt, *pred) : 0.0);
      continue;
    }
    const bool dir = q.qa_type == QaType::ego_direction_pre || q.qa_type == QaType::ego_direction_post;
    requests.push_back({dir ? Rubric::direction : Rubric::general, q.question, q.answer, resp});
    request_ids.push_back(q.item_id);
    request_group.push_back("qa:" + fam);
    fixed.push_back(blank(resp) ? 1 : 0);
  }
  std::map<std::string, std::vector<std::string>> hyps_by_task;
  std::map<std::string, std::vector<std::vector<std::string>>> refs_by_task;
  for (const auto& l : longform) {
    ++rep.counts["longform:" + l.task];
    const std::string resp = answer_of(l.item_id);
    if (blank(resp)) ++rep.unanswered;
    hyps_by_task[l.task].push_back(resp);
    refs_by_task[l.task].push_back({l.text});
    requests.push_back({Rubric::longform, l.query, l.text, resp});
    request_ids.push_back(l.item_id);
    request_group.push_back("lf:" + l.task);
    fixed.push_back(blank(resp) ? 1 : 0);
  }

  std::vector<RatingRequest> to_ask;
  std::vector<std::size_t> ask_index;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (fixed[i] == 0) {
      to_ask.push_back(requests[i]);
      ask_index.push_back(i);
    }
  }
  const auto asked = rater.rate_all(to_ask);
  std::vector<int> ratings(fixed.begin(), fixed.end());
  for (std::size_t k = 0; k < asked.size(); ++k) ratings[ask_index[k]] = asked[k];

  std::map<std::string, std::vector<int>> by_group;
  std::vector<int> qa_all;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    by_group[request_group[i]].push_back(ratings[i]);
    if (request_group[i].rfind("qa:", 0) == 0) qa_all.push_back(ratings[i]);
  }
  for (const auto& [g, r] : by_group) {
    const double c = correctness_score(r);
    if (g.rfind("qa:", 0) == 0) {
      rep.correctness[g.substr(3)] = c;
    } else {
      rep.longform_correctness[g.substr(3)] = c;
    }
  }
  if (!qa_all.empty()) rep.correctness["overall"] = correctness_score(qa_all);
  for (const auto& [fam, v] : rel_by_family) {
    rep.rel[fam] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
  for (const auto& [task, h] : hyps_by_task) rep.text[task] = corpus_text_overlap(h, refs_by_task[task]);

  if (!human_scores.empty()) {
    std::vector<double> human;
    std::vector<double> model;
    for (std::size_t i = 0; i < request_ids.size(); ++i) {
      auto it = human_scores.find(request_ids[i]);
      if (it == human_scores.end()) continue;
      human.push_back(it->second);
      model.push_back(ratings[i]);
    }
    rep.spearman = spearman(human, model);
  }
  return rep;
}

ordered_json EvalReport::to_json() const {
  ordered_json j;
  j["correctness"] = correctness;
  j["rel"] = rel;
  ordered_json t = ordered_json::object();
  for (const auto& [task, s] : text) t[task] = {{"bleu4", s.bleu4}, {"rougeL", s.rougeL}, {"cider", s.cider}};
  j["text"] = t;
  j["longform_correctness"] = longform_correctness;
  j["counts"] = counts;
  j["unanswered"] = unanswered;
  j["unparseable"] = unparseable;
  if (spearman) j["spearman"] = *spearman;
  j["rater"] = rater;
  j["config_fingerprint"] = config_fingerprint;
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char buf[160];
  out << "metric                          value\n";
  for (const auto& [k, v] : correctness) {
    std::snprintf(buf, sizeof buf, "%-30s %7.2f\n", ("C " + k).c_str(), v);
    out << buf;
  }
  for (const auto& [k, v] : rel) {
    std::snprintf(buf, sizeof buf, "%-30s %7.4f\n", ("REL " + k).c_str(), v);
    out << buf;
  }
  for (const auto& [task, s] : text) {
    std::snprintf(buf, sizeof buf, "%-30s %7.4f\n%-30s %7.4f\n%-30s %7.4f\n", (task + " BLEU-4").c_str(), s.bleu4,
                  (task + " ROUGE-L").c_str(), s.rougeL, (task + " CIDEr").c_str(), s.cider);
    out << buf;
  }
  for (const auto& [task, v] : longform_correctness) {
    std::snprintf(buf, sizeof buf, "%-30s %7.2f\n", ("C " + task).c_str(), v);
    out << buf;
  }
  if (spearman) {
    std::snprintf(buf, sizeof buf, "%-30s %7.4f\n", "Spearman", *spearman);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "unanswered %zu  unparseable %zu\n", unanswered, unparseable);
  out << buf << "rater " << rater << "\n";
  return out.str();
}

}  // namespace situ
