#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <thread>

#include "situ/config.hpp"
#include "situ/eval.hpp"
#include "situ/llm.hpp"
#include "situ/pipeline.hpp"
#include "situ/projector.hpp"
#include "situ/qa.hpp"
#include "situ/review_service.hpp"

using namespace situ;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::string data;
  std::string out;
  std::string cache;
  unsigned threads{0};
  bool llm{false};
  bool offline{false};
};

PipelineConfig load(const Globals& g) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (!g.data.empty()) cfg.paths.data_root = g.data;
  if (!g.out.empty()) cfg.paths.output_dir = g.out;
  if (!g.cache.empty()) cfg.paths.cache_dir = g.cache;
  return cfg;
}

void print_report(const RunReport& rep) {
  for (const auto& s : rep.stages) {
    std::cout << to_string(s.stage) << ": " << s.records << " records";
    for (const auto& p : s.outputs) std::cout << "  " << p.string();
    std::cout << "\n";
  }
  if (rep.verify_pass_rate) std::printf("verify pass rate: %.4f\n", *rep.verify_pass_rate);
  std::cout << (rep.template_only ? "generation: template-only\n" : "generation: llm\n");
}

int run_stages(const Globals& g, std::vector<Stage> stages) {
  const auto cfg = load(g);
  RunOptions opts;
  opts.stages = std::move(stages);
  opts.threads = g.threads;
  std::unique_ptr<LlmClient> client;
  if (g.llm) {
    client = make_client(cfg.gateway, cfg.paths.cache_dir, cfg.gateway.model, g.offline);
    opts.llm = client.get();
  }
  print_report(run_pipeline(cfg, opts));
  if (client) {
    std::cout << "llm remote calls: " << client->remote_calls() << ", cache hits: " << client->cache_hits() << "\n";
  }
  return 0;
}

std::map<std::string, double> load_human_scores(const fs::path& path) {
  std::map<std::string, double> out;
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    out[j.at("item_id").get<std::string>()] = j.at("score").get<double>();
  }
  return out;
}

int projector_demo(unsigned dim, unsigned state, unsigned n_tokens, unsigned seeds, double eps,
                   const std::string& save) {
  bool ok = true;
  for (auto sel : {SelectMode::linear, SelectMode::scan}) {
    for (auto fu : {FuseMode::add, FuseMode::star}) {
      const double tol = sel == SelectMode::linear ? 1e-6 : 1e-4;
      for (unsigned s = 1; s <= seeds; ++s) {
        const auto p = random_params(dim, state, sel, fu, s);
        const auto prev = random_tokens(n_tokens, dim, 1000 + s);
        const auto curr = random_tokens(n_tokens, dim, 2000 + s);
        const auto y = forward(prev, curr, p);
        const auto gc = grad_check(p, prev, curr, eps);
        const bool pass = y.rows() == curr.rows() && y.cols() == dim && gc.max_rel_error <= tol;
        ok = ok && pass;
        std::printf("%-6s %-4s seed %u: out %zux%zu, params %zu, max rel grad error %.3e over %zu entries (%s) %s\n",
                    to_string(sel).c_str(), to_string(fu).c_str(), s, y.rows(), y.cols(), p.parameter_count(),
                    gc.max_rel_error, gc.checked, gc.worst.c_str(), pass ? "ok" : "FAIL");
      }
    }
  }
  if (!save.empty()) {
    const auto p = random_params(dim, state, SelectMode::scan, FuseMode::star, 1);
    save_params(save, p);
    const auto back = load_params(save);
    std::printf("saved %s (%zu parameters, fp32), reload %s\n", save.c_str(), back.parameter_count(),
                back.parameter_count() == p.parameter_count() ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Situated change data pipeline, evaluation and review service"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("-c,--config", g.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--data", g.data, "Override the data root");
  app.add_option("--out", g.out, "Override the output directory");
  app.add_option("--cache", g.cache, "Override the LLM cache directory");
  app.add_option("-j,--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_flag("--llm", g.llm, "Use the LLM gateway for situation and long-form text");
  app.add_flag("--offline", g.offline, "Serve LLM requests from the cache only");

  std::map<std::string, Stage> stage_cmds{{"ingest", Stage::ingest},          {"sample-situations", Stage::situations},
                                          {"gen-context", Stage::context},     {"gen-queries", Stage::queries},
                                          {"gen-qa", Stage::qa},               {"stats", Stage::stats}};
  std::map<std::string, CLI::App*> stage_apps;
  for (const auto& [name, stage] : stage_cmds) {
    stage_apps[name] = app.add_subcommand(name, "Run the " + to_string(stage) + " stage");
  }

  auto* run = app.add_subcommand("run", "Run several stages in dependency order");
  std::vector<std::string> run_stages_names{"ingest", "situations", "context", "queries", "qa", "stats"};
  run->add_option("--stages", run_stages_names, "Stages to run")->delimiter(',');

  auto* fixtures = app.add_subcommand("make-fixtures", "Write a synthetic fixture dataset");
  std::string fixture_dir = "data";
  int fixture_pairs = 10;
  unsigned fixture_seed = 100;
  fixtures->add_option("--dir", fixture_dir, "Output directory");
  fixtures->add_option("--pairs", fixture_pairs, "Number of scan pairs")->check(CLI::PositiveNumber);
  fixtures->add_option("--seed", fixture_seed, "Seed of the first pair");

  auto* down = app.add_subcommand("downsample", "Downsample a QA file along one scaling axis");
  std::string axis, down_in, down_out;
  double fraction = 1.0;
  unsigned long long down_seed = 0;
  down->add_option("--axis", axis, "sample | situation | scan_pair")->required();
  down->add_option("--fraction", fraction, "Kept fraction in (0, 1]")->required();
  down->add_option("--seed", down_seed, "Sampling seed")->required();
  down->add_option("--input", down_in, "QA JSONL (default: <out>/qa.jsonl)");
  down->add_option("--output", down_out, "Destination JSONL")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score model predictions");
  std::string predictions, judge = "exact", human;
  evaluate->add_option("--predictions", predictions, "Predictions JSONL {item_id, response}")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--judge", judge, "exact | llm")->check(CLI::IsMember({"exact", "llm"}));
  evaluate->add_option("--human-scores", human, "JSONL {item_id, score} for rank correlation");

  auto* demo = app.add_subcommand("projector-demo", "Exercise the comparison projector kernel");
  unsigned dim = 8, state = 4, n_tokens = 6, seeds = 3;
  double eps = 1e-6;
  std::string save;
  demo->add_option("--dim", dim, "Channels");
  demo->add_option("--state", state, "Scan states per channel");
  demo->add_option("--tokens", n_tokens, "Aligned tokens per scene");
  demo->add_option("--seeds", seeds, "Random seeds per mode");
  demo->add_option("--eps", eps, "Finite-difference step");
  demo->add_option("--save", save, "Write scan+star parameters to this file");

  auto* serve = app.add_subcommand("serve-review", "Serve the review HTTP API");
  std::string bind = "127.0.0.1:8080";
  serve->add_option("--bind", bind, "host:port");

  auto* show = app.add_subcommand("show-config", "Print the effective configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, sub] : stage_apps) {
      if (sub->parsed()) return run_stages(g, {stage_cmds.at(name)});
    }
    if (run->parsed()) {
      std::vector<Stage> stages;
      for (const auto& s : run_stages_names) stages.push_back(stage_from_string(s));
      return run_stages(g, stages);
    }
    if (fixtures->parsed()) {
      write_fixture_dataset(fixture_dir, fixture_pairs, fixture_seed);
      std::cout << "wrote " << fixture_pairs << " pairs to " << fixture_dir << "\n";
      return 0;
    }
    if (down->parsed()) {
      const auto cfg = load(g);
      const fs::path in = down_in.empty() ? Artifacts(cfg.paths.output_dir).qa() : fs::path(down_in);
      const auto items = load_qa_jsonl(in);
      const auto kept = downsample_dataset(items, downsample_axis_from_string(axis), fraction, down_seed);
      nlohmann::ordered_json meta;
      meta["artifact"] = "qa";
      meta["source"] = in.filename().string();
      meta["axis"] = axis;
      meta["fraction"] = fraction;
      meta["seed"] = down_seed;
      std::ofstream out(down_out, std::ios::binary | std::ios::trunc);
      out << nlohmann::ordered_json{{"_meta", meta}}.dump() << "\n";
      for (const auto& q : kept) out << q.to_json().dump() << "\n";
      if (!out) throw Error("cannot write " + down_out);
      std::cout << "kept " << kept.size() << " of " << items.size() << " items\n";
      return 0;
    }
    if (evaluate->parsed()) {
      const auto cfg = load(g);
      RunOptions opts;
      opts.stages = {Stage::eval};
      opts.predictions = predictions;
      if (!human.empty()) opts.human_scores = load_human_scores(human);
      std::unique_ptr<LlmClient> client;
      std::unique_ptr<LlmJudge> rater;
      if (judge == "llm") {
        client = make_client(cfg.gateway, cfg.paths.cache_dir, cfg.gateway.judge_model, g.offline);
        DecodingParams p;
        p.temperature = cfg.gateway.judge_temperature;
        rater = std::make_unique<LlmJudge>(*client, p, cfg.gateway.concurrency);
        opts.rater = rater.get();
      }
      run_pipeline(cfg, opts);
      const auto j = nlohmann::json::parse(std::ifstream(Artifacts(cfg.paths.output_dir).eval()));
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (demo->parsed()) return projector_demo(dim, state, n_tokens, seeds, eps, save);
    if (serve->parsed()) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) throw ValidationError("--bind expects host:port");
      const std::string host = bind.substr(0, colon);
      const int port = std::stoi(bind.substr(colon + 1));
      // SIGINT/SIGTERM stop the server so the store lock is released on the way out.
      sigset_t sigs;
      sigemptyset(&sigs);
      sigaddset(&sigs, SIGINT);
      sigaddset(&sigs, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &sigs, nullptr);
      ReviewService svc(load(g));
      const int bound = svc.bind(host, port);
      std::thread([&svc, sigs] {
        int sig = 0;
        sigwait(&sigs, &sig);
        svc.stop();
      }).detach();
      std::cout << "review service listening on " << host << ":" << bound << std::endl;
      svc.serve();
      return 0;
    }
    if (show->parsed()) {
      const auto cfg = load(g);
      std::cout << cfg.to_ini() << "# fingerprint " << cfg.fingerprint() << "\n";
      return 0;
    }
  } catch (const LockContention& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
