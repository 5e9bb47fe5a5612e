#include <doctest.h>

#include <algorithm>
#include <random>

#include "situ/eval.hpp"

using namespace situ;

namespace {

// Direct transcription of the revised REL definition, kept separate from the library.
double rel_oracle(double g, double p) {
  if (g == 0 && p == 0) return 1;
  if (g == 0) return 0;
  const double e = std::fabs(p - g) / g;
  return 1 - (e < 1 ? e : 1);
}

struct Corpus {
  std::vector<std::string> hyps;
  std::vector<std::vector<std::string>> refs;
};

// Same sentences as tests/oracles/text_metrics.py.
Corpus toy2() {
  return {{"The chair was moved to the left of the table.", "A blanket is lying on the bed now."},
          {{"The chair has been moved to the left side of the table."},
           {"The blanket now lies on the bed.", "Someone put a blanket on the bed."}}};
}

Corpus toy4() {
  return {{"Move the chair two steps back toward the desk.", "The lamp was removed from the shelf.",
           "Push the stool under the kitchen counter again.",
           "The cup stands on the table, near the monitor."},
          {{"Move the chair back two steps so it is next to the desk."},
           {"The lamp that stood on the shelf has been removed.", "There is no lamp on the shelf anymore."},
           {"Push the stool back under the kitchen counter."},
           {"A cup is standing on the table next to the monitor."}}};
}

class FixedRater : public Rater {
 public:
  explicit FixedRater(int v) : v_(v) {}
  int rate(const RatingRequest&) override {
    ++calls;
    return v_;
  }
  std::string id() const override { return "fixed"; }
  int calls{0};

 private:
  int v_;
};

QAItem qa(std::string id, QaType t, std::string answer) {
  QAItem q;
  q.item_id = std::move(id);
  q.scan_pair_id = "p";
  q.situation_id = "p:standing:0";
  q.qa_type = t;
  q.question = "q?";
  q.answer = std::move(answer);
  q.ocot.type_tag = to_string(t);
  return q;
}

}  // namespace

TEST_CASE("rel_score branches") {
  CHECK(rel_score(0, 0) == 1.0);
  CHECK(rel_score(0, 0.1) == 0.0);
  CHECK(rel_score(2.0, 1.5) == 0.75);
  CHECK(rel_score(1.6, 0) == 0.0);
  CHECK_THROWS_AS(rel_score(-1, 0), ValidationError);
  CHECK_THROWS_AS(rel_score(1, std::nan("")), ValidationError);
  CHECK_THROWS_AS(rel_score(INFINITY, 1), ValidationError);
}

TEST_CASE("rel_score agrees with the direct transcription on 10k pairs") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 10000; ++i) {
    const double g = i % 10 == 0 ? 0.0 : u(rng);
    const double p = i % 7 == 0 ? 0.0 : u(rng);
    REQUIRE(rel_score(g, p) == rel_oracle(g, p));
  }
  for (double d : {0.1, 1.0, 3.7}) {
    CHECK(rel_score(d, d) == 1.0);
    CHECK(rel_score(d, 2 * d) == 0.0);
    CHECK(rel_score(d, 5 * d) == 0.0);
  }
}

TEST_CASE("correctness score") {
  CHECK(correctness_score({5}) == 100.0);
  CHECK(correctness_score({1, 1}) == 0.0);
  CHECK(correctness_score({5, 3, 1}) == 50.0);
  CHECK_THROWS_AS(correctness_score({}), ValidationError);
  CHECK_THROWS_AS(correctness_score({0}), ValidationError);
  CHECK_THROWS_AS(correctness_score({6}), ValidationError);

  std::mt19937 rng(3);
  for (int t = 0; t < 1000; ++t) {
    std::vector<int> r(1 + rng() % 20);
    for (int& x : r) x = 1 + static_cast<int>(rng() % 5);
    const double base = correctness_score(r);
    auto shuffled = r;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(correctness_score(shuffled) == doctest::Approx(base).epsilon(1e-12));
    // Raising one rating by one adds 25/N points.
    const auto k = rng() % r.size();
    if (r[k] < 5) {
      auto up = r;
      ++up[k];
      CHECK(correctness_score(up) - base == doctest::Approx(25.0 / static_cast<double>(r.size())));
    }
  }
}

TEST_CASE("spearman") {
  CHECK(spearman({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5));
  // scipy.stats.spearmanr on a tied sample, see tests/oracles/text_metrics.py.
  CHECK(spearman({3, 1, 4, 1, 5, 9, 2, 6}, {2, 7, 1, 8, 2, 8, 1, 8}) == doctest::Approx(0.198853681210).epsilon(1e-10));
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), ValidationError);
  CHECK_THROWS_AS(spearman({1}, {1}), ValidationError);
  CHECK_THROWS_AS(spearman({2, 2, 2}, {1, 2, 3}), ValidationError);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(10), b(10);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    std::vector<double> ea(a.size());
    std::transform(a.begin(), a.end(), ea.begin(), [](double x) { return std::exp(x) * 3 + 1; });
    CHECK(spearman(ea, b) == doctest::Approx(spearman(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("text overlap identity and empty cases") {
  const auto id = text_overlap("the chair is next to the table", {"The chair is next to the table."});
  CHECK(id.bleu4 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.rougeL == doctest::Approx(1.0).epsilon(1e-12));
  const auto empty = text_overlap("", {"the chair is next to the table"});
  CHECK(empty.bleu4 == 0.0);
  CHECK(empty.rougeL == 0.0);
  CHECK(empty.cider == 0.0);
  CHECK(tokenize("It's 11 o'clock, NOW!") == std::vector<std::string>{"its", "11", "oclock", "now"});

  std::mt19937 rng(9);
  const std::vector<std::string> words{"chair", "table", "moved", "the", "left", "bed", "lamp", "two"};
  for (int t = 0; t < 100; ++t) {
    std::string h;
    const int n = 4 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) h += (i ? " " : "") + words[rng() % words.size()];
    CHECK(text_overlap(h, {h}).bleu4 == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("text overlap matches the reference implementations") {
  const auto a = toy2();
  const auto sa = corpus_text_overlap(a.hyps, a.refs);
  CHECK(sa.bleu4 == doctest::Approx(0.307464887407).epsilon(1e-6));
  CHECK(sa.rougeL == doctest::Approx(0.739882049153).epsilon(1e-6));
  CHECK(sa.cider == doctest::Approx(3.650274881732).epsilon(1e-6));

  const auto b = toy4();
  const auto sb = corpus_text_overlap(b.hyps, b.refs);
  CHECK(sb.bleu4 == doctest::Approx(0.198438970285).epsilon(1e-6));
  CHECK(sb.rougeL == doctest::Approx(0.634152090798).epsilon(1e-6));
  CHECK(sb.cider == doctest::Approx(3.084334324841).epsilon(1e-6));

  std::vector<std::vector<std::string>> h;
  std::vector<std::vector<std::vector<std::string>>> r;
  for (std::size_t i = 0; i < b.hyps.size(); ++i) {
    h.push_back(tokenize(b.hyps[i]));
    r.emplace_back();
    for (const auto& x : b.refs[i]) r.back().push_back(tokenize(x));
  }
  const auto per = cider_d(h, r);
  const double expected[] = {2.615903403033, 1.543803858806, 5.762891301651, 2.414738735873};
  for (std::size_t i = 0; i < 4; ++i) CHECK(per[i] == doctest::Approx(expected[i]).epsilon(1e-6));
}

TEST_CASE("canonical answers and exact matching") {
  CHECK(canonical_answer("  Eleven o'clock. ") == "11 o'clock");
  CHECK(canonical_answer("One") == "one");
  ExactMatchRater r;
  CHECK(r.rate({Rubric::direction, "", "11 o'clock", "eleven o'clock"}) == 5);
  CHECK(r.rate({Rubric::general, "", "Two", "Three"}) == 1);
}

TEST_CASE("evaluate_run scoring paths") {
  const std::vector<QAItem> items = {
      qa("a", QaType::counting, "One"),
      qa("b", QaType::ego_direction_post, "11 o'clock"),
      qa("c", QaType::allo_displacement, "1.6 m"),
      qa("d", QaType::ego_distance_pre, "2.0 m"),
      qa("e", QaType::existence, "No"),
  };
  LongFormItem lf;
  lf.item_id = "p:standing:0:description:39";
  lf.task = "description";
  lf.query = "What happened to the chair?";
  lf.text = "The chair was moved closer to the bed.";

  ExactMatchRater exact;
  std::vector<Prediction> perfect = {{"a", "One"}, {"b", "eleven o'clock"}, {"c", "160 cm"}, {"d", "It is about 1.5m away."},
                                     {"e", "no"}, {lf.item_id, lf.text}};
  const auto rep = evaluate_run(perfect, items, {lf}, exact, {}, "abc");
  CHECK(rep.correctness.at("counting") == 100.0);
  CHECK(rep.correctness.at("ego_direction") == 100.0);
  CHECK(rep.correctness.at("overall") == 100.0);
  CHECK(rep.rel.at("allo_displacement") == doctest::Approx(1.0));
  CHECK(rep.rel.at("ego_distance") == doctest::Approx(0.75));
  CHECK(rep.text.at("description").bleu4 == doctest::Approx(1.0));
  CHECK(rep.longform_correctness.at("description") == 100.0);
  CHECK(rep.config_fingerprint == "abc");
  CHECK(rep.unanswered == 0);

  FixedRater none(5);
  const auto empty = evaluate_run({}, items, {lf}, none);
  CHECK(none.calls == 0);
  CHECK(empty.correctness.at("overall") == 0.0);
  CHECK(empty.rel.at("allo_displacement") == 0.0);
  CHECK(empty.text.at("description").bleu4 == 0.0);
  CHECK(empty.unanswered == 6);

  FixedRater threes(3);
  const auto mid = evaluate_run(perfect, items, {lf}, threes);
  CHECK(mid.correctness.at("overall") == 50.0);
  CHECK(mid.longform_correctness.at("description") == 50.0);
  CHECK(threes.calls == 4);

  const auto bad = evaluate_run({{"c", "far away"}}, items, {}, exact);
  CHECK(bad.unparseable == 1);
  CHECK(bad.rel.at("allo_displacement") == 0.0);

  CHECK_THROWS_AS(evaluate_run({{"zzz", "x"}}, items, {}, exact), ValidationError);

  const std::map<std::string, double> human{{"a", 1}, {"b", 4}, {"e", 3}, {lf.item_id, 5}};
  CHECK_THROWS_AS(evaluate_run(perfect, items, {lf}, exact, human), ValidationError);  // constant ratings
  auto one_wrong = perfect;
  one_wrong[0].response = "Two";
  const auto with_human = evaluate_run(one_wrong, items, {lf}, exact, human);
  REQUIRE(with_human.spearman.has_value());
  CHECK(*with_human.spearman == doctest::Approx(spearman({1, 4, 3, 5}, {1, 5, 5, 5})));
}
