#include <doctest.h>

#include <unistd.h>

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include "scenes.hpp"
#include "situ/llm.hpp"
#include "situ/pipeline.hpp"
#include "situ/qa.hpp"

using namespace situ;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("situ_pipeline_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PipelineConfig fixture_config(const fs::path& root, int n_pairs) {
  const auto data = root / "data";
  write_fixture_dataset(data, n_pairs);
  PipelineConfig cfg;
  cfg.paths.data_root = data.string();
  cfg.paths.output_dir = (root / "out").string();
  cfg.paths.cache_dir = (root / "cache").string();
  return cfg;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

std::vector<Stage> generation_stages() {
  return {Stage::ingest, Stage::situations, Stage::context, Stage::queries, Stage::qa, Stage::stats};
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("stage names round-trip") {
  for (auto s : all_stages()) CHECK(stage_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(stage_from_string("train"), ValidationError);
}

TEST_CASE("fixture pipeline end to end, single-threaded and deterministic") {
  const auto root = fresh_dir("e2e");
  const auto cfg = fixture_config(root, 10);
  RunOptions opts;
  opts.stages = generation_stages();
  opts.threads = 1;

  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_pipeline(cfg, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 10.0);
  CHECK(rep.template_only);
  REQUIRE(rep.verify_pass_rate);
  CHECK(*rep.verify_pass_rate == 1.0);

  const Artifacts art(cfg.paths.output_dir);
  for (const auto& p : {art.pairs(), art.situations(), art.contexts(), art.queries(QueryTask::description),
                        art.queries(QueryTask::rearrangement), art.review_tasks(), art.longform(), art.qa()}) {
    INFO(p);
    REQUIRE(fs::exists(p));
    const auto meta = nlohmann::json::parse(first_line(p));
    CHECK(meta["_meta"]["config_fingerprint"] == cfg.fingerprint());
  }
  CHECK(nlohmann::json::parse(first_line(art.situations()))["_meta"]["template_only"] == true);

  const auto situations = rep.stages[1].records;
  CHECK(situations >= 85);
  CHECK(situations <= 115);
  const auto qa = load_qa_jsonl(art.qa());
  CHECK(qa.size() > situations);
  CHECK(!load_longform_jsonl(art.longform()).empty());

  const auto first = snapshot(art.root);
  run_pipeline(cfg, opts);
  CHECK(snapshot(art.root) == first);

  opts.threads = 4;
  run_pipeline(cfg, opts);
  CHECK(snapshot(art.root) == first);
}

TEST_CASE("missing and stale dependencies are named") {
  const auto root = fresh_dir("deps");
  auto cfg = fixture_config(root, 2);
  RunOptions opts;
  opts.stages = {Stage::ingest};
  run_pipeline(cfg, opts);

  opts.stages = {Stage::qa};
  try {
    run_pipeline(cfg, opts);
    FAIL("qa ran without situations");
  } catch (const MissingArtifact& e) {
    CHECK(e.path().filename() == "situations.jsonl");
    CHECK(std::string(e.what()).find("situations.jsonl") != std::string::npos);
  }

  opts.stages = {Stage::situations};
  run_pipeline(cfg, opts);
  cfg.seed += 1;
  opts.stages = {Stage::context};
  CHECK_THROWS_WITH_AS(run_pipeline(cfg, opts), doctest::Contains("stale artifact"), Error);

  PipelineConfig empty;
  empty.paths.data_root = (root / "nowhere").string();
  empty.paths.output_dir = (root / "out2").string();
  opts.stages = {Stage::ingest};
  CHECK_THROWS_AS(run_pipeline(empty, opts), MissingArtifact);
}

TEST_CASE("eval stage scores predictions against the generated dataset") {
  const auto root = fresh_dir("eval");
  const auto cfg = fixture_config(root, 2);
  RunOptions opts;
  opts.stages = generation_stages();
  run_pipeline(cfg, opts);
  const Artifacts art(cfg.paths.output_dir);

  opts.stages = {Stage::eval};
  CHECK_THROWS_AS(run_pipeline(cfg, opts), ValidationError);

  const auto preds = root / "preds.jsonl";
  {
    std::ofstream out(preds);
    for (const auto& q : load_qa_jsonl(art.qa())) {
      out << nlohmann::json{{"item_id", q.item_id}, {"response", q.answer}}.dump() << "\n";
    }
  }
  opts.predictions = preds;
  run_pipeline(cfg, opts);
  const auto j = nlohmann::json::parse(std::ifstream(art.eval()));
  CHECK(j["_meta"]["config_fingerprint"] == cfg.fingerprint());
  CHECK(j["rater"] == "exact_match");
  CHECK(j["correctness"]["overall"].get<double>() == doctest::Approx(100.0));
}

TEST_CASE("review tasks follow the decision state") {
  const auto pair = testing::feature_scene();
  std::map<std::string, ObjectReview> review;
  auto find = [&](ObjectId id) {
    for (auto& t : review_tasks(pair, review)) {
      if (t.object_id == id) return t;
    }
    FAIL("no task");
    return ReviewTask{};
  };
  CHECK(find(14).status == ReviewStatus::pending);
  CHECK(find(5).status == ReviewStatus::auto_resolved);
  CHECK(find(5).query(pair, QueryTask::description).find("the table") != std::string::npos);

  auto chair = find(11);
  REQUIRE(chair.resolved);
  ObjectReview& r = review[chair.task_id];
  for (const auto& c : chair.candidates) r.rejected[c.feature_id()] = "unlikely to be recognised";
  chair = find(11);
  CHECK(chair.status == ReviewStatus::pending);
  CHECK(chair.candidates.empty());
  CHECK(!chair.resolved);

  r.manual = ManualFeature{"between the blue and the orange chair", "a", ""};
  chair = find(11);
  CHECK(chair.status == ReviewStatus::human_resolved);
  CHECK(chair.query(pair, QueryTask::description).find("between the blue and the orange chair") !=
        std::string::npos);

  const auto j = review_task_json(chair, pair, true);
  CHECK(j["geometry"]["same_label_count"] == 4);
  CHECK(j["rejected"].size() == r.rejected.size());
  CHECK(j["queries"].contains("rearrangement"));
  for (const auto& c : j["candidates"]) CHECK(c.contains("previews"));
}

namespace {

// Answers generation prompts in the worked-example format, naming the first payload object.
class ScriptedTransport : public Transport {
 public:
  HttpReply post(const std::string& body) override {
    ++calls;
    const auto req = nlohmann::json::parse(body);
    const std::string user = req["messages"].back()["content"];
    const auto open = user.find('{');
    const auto payload = nlohmann::json::parse(user.substr(open, user.rfind('}') - open + 1));
    const std::string first = payload["objects"].begin().key();
    std::string text;
    if (payload["objects"].begin()->contains("attributes") || payload["objects"].begin()->contains("location")) {
      text = "'S': 'Standing next to the " + first + " by the window.', 'O': '" + first + "'";
    }
    for (auto& [group, objs] : payload["objects"].items()) {
      if (!objs.is_object() || group == "unchanged") continue;
      for (auto& [key, v] : objs.items()) {
        text += "'O': '" + key + "', 'T': '" + group + "', 'C': 'Scripted description of " + key + ".'\n";
      }
    }
    nlohmann::json j;
    j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}});
    return {200, j.dump(), std::nullopt, ""};
  }
  std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("generation client replaces template text and is cached on rerun") {
  const auto root = fresh_dir("llm");
  const auto cfg = fixture_config(root, 2);
  auto transport = std::make_shared<ScriptedTransport>();
  ClientOptions co;
  co.model = "scripted";
  co.rate_per_s = 0;
  LlmClient client(co, cfg.paths.cache_dir, transport);
  RunOptions opts;
  opts.stages = {Stage::ingest, Stage::situations, Stage::context, Stage::queries};
  opts.llm = &client;
  const auto rep = run_pipeline(cfg, opts);
  CHECK(!rep.template_only);
  const Artifacts art(cfg.paths.output_dir);
  CHECK(nlohmann::json::parse(first_line(art.situations()))["_meta"]["template_only"] == false);

  std::ifstream sit(art.situations());
  std::string line;
  std::getline(sit, line);
  std::getline(sit, line);
  const auto s = nlohmann::json::parse(line);
  REQUIRE(s.contains("descriptive_text"));
  CHECK(s["descriptive_text"].get<std::string>().rfind("Standing next to the", 0) == 0);
  CHECK(s["reference_ids"].size() == 1);

  bool scripted = false;
  for (const auto& item : load_longform_jsonl(art.longform())) {
    if (item.task == "description" && item.text.rfind("Scripted description of", 0) == 0) scripted = true;
  }
  CHECK(scripted);

  const int calls = transport->calls;
  const auto first = snapshot(art.root);
  LlmClient offline(co, cfg.paths.cache_dir, nullptr);
  opts.llm = &offline;
  run_pipeline(cfg, opts);
  CHECK(transport->calls == calls);
  CHECK(snapshot(art.root) == first);
}
