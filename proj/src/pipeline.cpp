#include "situ/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "situ/context.hpp"
#include "situ/llm.hpp"
#include "situ/qa.hpp"
#include "situ/sampler.hpp"

namespace situ {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::situations: return "situations";
    case Stage::context: return "context";
    case Stage::queries: return "queries";
    case Stage::qa: return "qa";
    case Stage::stats: return "stats";
    case Stage::eval: return "eval";
  }
  return "ingest";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> kAll{Stage::ingest,  Stage::situations, Stage::context, Stage::queries,
                                       Stage::qa,      Stage::stats,      Stage::eval};
  return kAll;
}

Stage stage_from_string(const std::string& s) {
  for (auto st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown stage '" + s + "'");
}

namespace {

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        {
          std::lock_guard lock(error_mu);
          if (error) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

ordered_json meta_line(const std::string& artifact, const PipelineConfig& cfg,
                       std::optional<bool> template_only = std::nullopt) {
  ordered_json m;
  m["artifact"] = artifact;
  m["config_fingerprint"] = cfg.fingerprint();
  if (template_only) m["template_only"] = *template_only;
  return ordered_json{{"_meta", m}};
}

void write_jsonl(const fs::path& path, const ordered_json& meta, const std::vector<ordered_json>& records) {
  std::string text = meta.dump() + "\n";
  for (const auto& r : records) text += r.dump() + "\n";
  detail::write_file_atomic(path, text);
}

void require(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifact(path);
}

// Records of an upstream artifact, refusing files written under another configuration.
std::vector<json> read_artifact(const fs::path& path, const PipelineConfig& cfg) {
  require(path);
  std::istringstream in(detail::read_file(path));
  std::vector<json> out;
  std::string line;
  std::size_t offset = 0;
  bool first = true;
  while (std::getline(in, line)) {
    const std::size_t start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what(), start + e.byte);
    }
    if (first) {
      first = false;
      if (!j.is_object() || !j.contains("_meta")) throw ParseError(path.string() + ": missing _meta header", start);
      const std::string fp = j["_meta"].value("config_fingerprint", "");
      if (fp != cfg.fingerprint()) {
        throw Error("stale artifact " + path.string() + ": written under config " + fp + ", current config is " +
                    cfg.fingerprint());
      }
      continue;
    }
    out.push_back(std::move(j));
  }
  if (first) throw ParseError(path.string() + ": empty artifact", 0);
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Values of 'K': '...' style fields in a model reply, in order of appearance.
std::vector<std::pair<std::string, std::string>> quoted_fields(const std::string& text,
                                                               const std::vector<std::string>& keys) {
  struct Hit {
    std::size_t at;
    std::size_t len;
    std::string key;
  };
  std::vector<Hit> hits;
  for (const auto& k : keys) {
    for (const std::string& marker : {"'" + k + "': '", "'" + k + "': ", "\"" + k + "\": \""}) {
      for (auto pos = text.find(marker); pos != std::string::npos; pos = text.find(marker, pos + 1)) {
        const bool taken = std::any_of(hits.begin(), hits.end(), [&](const Hit& h) { return h.at == pos; });
        if (!taken) hits.push_back({pos, marker.size(), k});
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.at < b.at; });
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const std::size_t b = hits[i].at + hits[i].len;
    const std::size_t e = i + 1 < hits.size() ? hits[i + 1].at : text.size();
    if (e < b) continue;
    std::string v = trim(text.substr(b, e - b));
    while (!v.empty() && (v.back() == ',' || v.back() == '\'' || v.back() == '"' || v.back() == '}')) {
      v.pop_back();
      v = trim(v);
    }
    if (!v.empty() && (v.front() == '\'' || v.front() == '"')) v.erase(0, 1);
    out.emplace_back(hits[i].key, v);
  }
  return out;
}

std::optional<ObjectId> id_of_key(const std::string& key) {
  const auto us = key.rfind('_');
  if (us == std::string::npos || us + 1 >= key.size()) return std::nullopt;
  const std::string digits = key.substr(us + 1);
  if (digits.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
  return std::stoi(digits);
}

DecodingParams gen_params(const PipelineConfig& cfg) {
  DecodingParams p;
  p.temperature = cfg.gateway.gen_temperature;
  return p;
}

// --- stages ---------------------------------------------------------------------------------------

struct Run {
  const PipelineConfig& cfg;
  const RunOptions& opts;
  Artifacts art;
  RunReport report;

  bool template_only() const { return opts.llm == nullptr; }
  unsigned threads() const { return opts.threads; }

  std::vector<ScanPair> pairs() const { return load_ingested_pairs(cfg); }

  std::map<std::string, std::vector<json>> by_pair(const std::vector<json>& records) const {
    std::map<std::string, std::vector<json>> out;
    for (const auto& r : records) out[r.at("scan_pair_id").get<std::string>()].push_back(r);
    return out;
  }

  StageReport ingest() {
    const fs::path root = cfg.paths.data_root;
    std::vector<fs::path> manifests;
    const fs::path index = root / "index.jsonl";
    if (fs::exists(index)) {
      std::istringstream in(detail::read_file(index));
      std::string line;
      while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = detail::parse_json(line, index.string());
        if (!j.contains("manifest") || !j["manifest"].is_string()) {
          throw ValidationError(index.string() + ": entry without a manifest path");
        }
        manifests.push_back(root / j["manifest"].get<std::string>());
      }
    } else if (fs::is_directory(root)) {
      for (const auto& e : fs::directory_iterator(root)) {
        const std::string name = e.path().filename().string();
        if (name.size() > 14 && name.ends_with(".manifest.json")) manifests.push_back(e.path());
      }
      std::sort(manifests.begin(), manifests.end());
    } else {
      throw MissingArtifact(root);
    }
    if (manifests.empty()) throw ValidationError("no pair manifests under " + root.string());
    std::vector<ScanPair> loaded(manifests.size());
    parallel_for(manifests.size(), threads(), [&](std::size_t i) { loaded[i] = load_scan_pair(manifests[i]); });
    std::set<std::string> seen;
    std::vector<ordered_json> records;
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      const auto& p = loaded[i];
      if (!seen.insert(p.pair_id).second) throw ValidationError("duplicate pair id " + p.pair_id);
      ordered_json r;
      r["scan_pair_id"] = p.pair_id;
      r["manifest"] = fs::relative(manifests[i], root).generic_string();
      r["prev_scan"] = p.prev.scan_id;
      r["curr_scan"] = p.curr.scan_id;
      r["objects_prev"] = p.prev.objects.size();
      r["objects_curr"] = p.curr.objects.size();
      r["changes"] = p.changes.size();
      records.push_back(std::move(r));
    }
    write_jsonl(art.pairs(), meta_line("pairs", cfg), records);
    return {Stage::ingest, {art.pairs()}, records.size()};
  }

  void expand_situation(const ScanPair& pair, Situation& s) const {
    ordered_json payload;
    payload["brief_situation"] = s.brief_text;
    payload["objects"] = build_situation_payload(pair.curr, s, cfg.sampler, cfg.geometry);
    const std::string reply = opts.llm->complete(TemplateId::situation_expand, payload, gen_params(cfg));
    const auto fields = quoted_fields(reply, {"S", "O"});
    std::optional<std::string> text;
    std::vector<ObjectId> refs;
    for (const auto& [k, v] : fields) {
      if (k == "S" && !text) {
        text = v;
      } else if (k == "O" && text) {
        std::istringstream keys(v);
        std::string key;
        while (std::getline(keys, key, ',')) {
          if (auto id = id_of_key(trim(key)); id && pair.curr.find(*id)) refs.push_back(*id);
        }
        break;
      }
    }
    if (!text) text = trim(reply);
    s.descriptive_text = *text;
    s.reference_ids = refs;
  }

  StageReport situations() {
    const auto ps = pairs();
    std::vector<std::vector<Situation>> per(ps.size());
    parallel_for(ps.size(), threads(), [&](std::size_t i) {
      per[i] = sample_situations(ps[i], derive_seed(cfg.seed, ps[i].pair_id, 0), cfg.sampler, cfg.geometry);
      if (opts.llm) {
        for (auto& s : per[i]) expand_situation(ps[i], s);
      }
    });
    std::vector<ordered_json> records;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (const auto& s : per[i]) records.push_back(situation_to_json(s, ps[i].pair_id));
    }
    write_jsonl(art.situations(), meta_line("situations", cfg, template_only()), records);
    return {Stage::situations, {art.situations()}, records.size()};
  }

  // Long-form texts keyed by "label_id" for every changed entry.
  ordered_json longform_texts(const ContextRecord& ctx, const ordered_json& payload) const {
    std::map<std::string, LongFormText> texts;
    for (const auto& e : ctx.entries) {
      if (e.group == ContextGroup::unchanged) continue;
      texts[e.key] = template_longform(e, cfg.geometry, cfg.context);
    }
    if (opts.llm) {
      ordered_json req;
      req["brief_situation"] = ctx.brief_text;
      req["objects"] = payload;
      const std::string reply = opts.llm->complete(TemplateId::longform_gen, req, gen_params(cfg));
      std::string key;
      for (const auto& [k, v] : quoted_fields(reply, {"O", "T", "C", "R"})) {
        if (k == "O") {
          key = v;
        } else if (texts.count(key) && k == "C") {
          texts[key].description = v;
        } else if (texts.count(key) && k == "R" && texts[key].rearrangement) {
          texts[key].rearrangement = v;
        }
      }
    }
    ordered_json out = ordered_json::object();
    for (const auto& e : ctx.entries) {
      auto it = texts.find(e.key);
      if (it == texts.end()) continue;
      ordered_json t;
      t["group"] = to_string(e.group);
      t["description"] = it->second.description;
      if (it->second.rearrangement) t["rearrangement"] = *it->second.rearrangement;
      out[e.key] = t;
    }
    return out;
  }

  StageReport context() {
    const auto ps = pairs();
    const auto sits = by_pair(read_artifact(art.situations(), cfg));
    std::vector<std::vector<ordered_json>> per(ps.size());
    parallel_for(ps.size(), threads(), [&](std::size_t i) {
      auto it = sits.find(ps[i].pair_id);
      if (it == sits.end()) return;
      for (const auto& sj : it->second) {
        const Situation s = situation_from_json(sj);
        const auto ctx = build_context(ps[i], s, cfg.geometry);
        const auto payload = context_payload(ctx, ps[i], ContextShape::longform, cfg.geometry);
        ordered_json r;
        r["scan_pair_id"] = ps[i].pair_id;
        r["situation_id"] = s.situation_id;
        r["brief_text"] = s.brief_text;
        r["objects"] = payload;
        r["texts"] = longform_texts(ctx, payload);
        per[i].push_back(std::move(r));
      }
    });
    std::vector<ordered_json> records;
    for (auto& v : per) std::move(v.begin(), v.end(), std::back_inserter(records));
    write_jsonl(art.contexts(), meta_line("contexts", cfg, template_only()), records);
    return {Stage::context, {art.contexts()}, records.size()};
  }

  StageReport queries() {
    const auto ps = pairs();
    const auto ctxs = by_pair(read_artifact(art.contexts(), cfg));
    std::map<std::string, ObjectReview> review;
    if (opts.review) {
      review = *opts.review;
    } else if (fs::exists(art.review_log())) {
      review = ReviewState::replay(art.review_log()).snapshot();
    }
    struct PerPair {
      std::vector<ordered_json> tasks;
      std::map<QueryTask, std::vector<ordered_json>> queries;
      std::vector<ordered_json> longform;
    };
    std::vector<PerPair> per(ps.size());
    parallel_for(ps.size(), threads(), [&](std::size_t i) {
      const auto& pair = ps[i];
      auto& out = per[i];
      const auto tasks = review_tasks(pair, review, cfg.query, cfg.geometry);
      for (const auto& t : tasks) {
        out.tasks.push_back(review_task_json(t, pair, false));
        if (!t.resolved) continue;
        for (auto qt : t.query_tasks()) {
          ordered_json q;
          q["scan_pair_id"] = pair.pair_id;
          q["object_id"] = t.object_id;
          q["feature_kind"] = to_string(t.resolved->kind);
          q["tense"] = to_string(t.resolved->tense);
          q["query"] = t.query(pair, qt);
          out.queries[qt].push_back(std::move(q));
        }
      }
      auto it = ctxs.find(pair.pair_id);
      if (it == ctxs.end()) return;
      for (const auto& c : it->second) {
        const auto& texts = c.at("texts");
        for (const auto& t : tasks) {
          if (!t.resolved) continue;
          const std::string key = t.label + "_" + std::to_string(t.object_id);
          if (!texts.contains(key)) continue;
          for (auto qt : t.query_tasks()) {
            const std::string field = to_string(qt);
            if (!texts[key].contains(field)) continue;
            LongFormItem item;
            item.situation_id = c.at("situation_id").get<std::string>();
            item.item_id = item.situation_id + ":" + field + ":" + std::to_string(t.object_id);
            item.scan_pair_id = pair.pair_id;
            item.object_id = t.object_id;
            item.task = field;
            item.query = t.query(pair, qt);
            item.text = texts[key][field].get<std::string>();
            out.longform.push_back(item.to_json());
          }
        }
      }
    });
    std::vector<ordered_json> tasks, longform;
    std::map<QueryTask, std::vector<ordered_json>> queries{{QueryTask::description, {}},
                                                           {QueryTask::rearrangement, {}}};
    for (auto& p : per) {
      std::move(p.tasks.begin(), p.tasks.end(), std::back_inserter(tasks));
      std::move(p.longform.begin(), p.longform.end(), std::back_inserter(longform));
      for (auto& [qt, v] : p.queries) std::move(v.begin(), v.end(), std::back_inserter(queries[qt]));
    }
    StageReport rep{Stage::queries, {}, 0};
    for (auto& [qt, v] : queries) {
      write_jsonl(art.queries(qt), meta_line(to_string(qt), cfg), v);
      rep.outputs.push_back(art.queries(qt));
      rep.records += v.size();
    }
    write_jsonl(art.review_tasks(), meta_line("review_tasks", cfg), tasks);
    write_jsonl(art.longform(), meta_line("longform", cfg, template_only()), longform);
    rep.outputs.push_back(art.review_tasks());
    rep.outputs.push_back(art.longform());
    return rep;
  }

  StageReport qa() {
    const auto ps = pairs();
    const auto sits = by_pair(read_artifact(art.situations(), cfg));
    require(art.contexts());
    struct PerPair {
      std::vector<ordered_json> items;
      std::size_t generated{0};
      std::map<std::string, std::size_t> rejected;
    };
    std::vector<PerPair> per(ps.size());
    parallel_for(ps.size(), threads(), [&](std::size_t i) {
      auto it = sits.find(ps[i].pair_id);
      if (it == sits.end()) return;
      for (const auto& sj : it->second) {
        const Situation s = situation_from_json(sj);
        const auto ctx = build_context(ps[i], s, cfg.geometry);
        const auto items =
            generate_qa(ps[i], s, ctx, derive_seed(cfg.seed, s.situation_id, 1), cfg.qa, cfg.geometry);
        for (const auto& item : items) {
          ++per[i].generated;
          const auto v = verify_qa(item, ps[i], s, ctx, cfg.qa, cfg.geometry);
          if (v.verified) {
            per[i].items.push_back(item.to_json());
          } else {
            ++per[i].rejected[v.reason];
          }
        }
      }
    });
    std::vector<ordered_json> items;
    std::size_t generated = 0;
    std::map<std::string, std::size_t> rejected;
    for (auto& p : per) {
      generated += p.generated;
      for (auto& [k, n] : p.rejected) rejected[k] += n;
      std::move(p.items.begin(), p.items.end(), std::back_inserter(items));
    }
    write_jsonl(art.qa(), meta_line("qa", cfg), items);
    const double rate = generated ? static_cast<double>(items.size()) / static_cast<double>(generated) : 1.0;
    ordered_json v = meta_line("verify", cfg);
    v["generated"] = generated;
    v["verified"] = items.size();
    v["pass_rate"] = rate;
    v["rejected"] = rejected;
    detail::write_file_atomic(art.verify(), v.dump(2) + "\n");
    report.verify_pass_rate = rate;
    return {Stage::qa, {art.qa(), art.verify()}, items.size()};
  }

  std::vector<QAItem> qa_items() const {
    std::vector<QAItem> out;
    for (const auto& j : read_artifact(art.qa(), cfg)) out.push_back(QAItem::from_json(ordered_json(j)));
    return out;
  }

  std::vector<LongFormItem> longform_items() const {
    std::vector<LongFormItem> out;
    for (const auto& j : read_artifact(art.longform(), cfg)) {
      out.push_back(LongFormItem::from_json(ordered_json(j)));
    }
    return out;
  }

  StageReport stats() {
    const auto qa = qa_items();
    const auto lf = longform_items();
    const auto st = dataset_stats(qa, lf);
    ordered_json j = meta_line("stats", cfg);
    const auto body = st.to_json();
    for (auto& [k, v] : body.items()) j[k] = v;
    detail::write_file_atomic(art.stats_json(), j.dump(2) + "\n");
    detail::write_file_atomic(art.stats_table(), st.to_table());
    return {Stage::stats, {art.stats_json(), art.stats_table()}, st.total};
  }

  StageReport eval() {
    if (!opts.predictions) throw ValidationError("eval stage needs a predictions file");
    require(*opts.predictions);
    const auto qa = qa_items();
    const auto lf = longform_items();
    const auto preds = load_predictions(*opts.predictions);
    ExactMatchRater exact;
    Rater& rater = opts.rater ? *opts.rater : static_cast<Rater&>(exact);
    const auto rep = evaluate_run(preds, qa, lf, rater, opts.human_scores, cfg.fingerprint());
    ordered_json j = meta_line("eval", cfg);
    const auto body = rep.to_json();
    for (auto& [k, v] : body.items()) j[k] = v;
    detail::write_file_atomic(art.eval(), j.dump(2) + "\n");
    return {Stage::eval, {art.eval()}, preds.size()};
  }
};

}  // namespace

std::vector<ScanPair> load_ingested_pairs(const PipelineConfig& cfg) {
  const Artifacts art(cfg.paths.output_dir);
  const auto records = read_artifact(art.pairs(), cfg);
  std::vector<ScanPair> out(records.size());
  parallel_for(records.size(), 0, [&](std::size_t i) {
    const fs::path manifest = fs::path(cfg.paths.data_root) / records[i].at("manifest").get<std::string>();
    require(manifest);
    out[i] = load_scan_pair(manifest);
  });
  return out;
}

void write_fixture_dataset(const fs::path& dir, int n_pairs, unsigned base_seed, const FixtureSpec& spec) {
  std::string index;
  for (int i = 0; i < n_pairs; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "fixture_%03d", i);
    const auto pair = make_fixture(base_seed + static_cast<unsigned>(i), spec, id);
    const auto manifest = write_scan_pair(pair, dir);
    index += ordered_json{{"manifest", manifest.filename().string()}}.dump() + "\n";
  }
  detail::write_file_atomic(dir / "index.jsonl", index);
}

RunReport run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
  std::set<Stage> wanted(opts.stages.begin(), opts.stages.end());
  Run run{cfg, opts, Artifacts(cfg.paths.output_dir), {}};
  run.report.template_only = opts.llm == nullptr;
  fs::create_directories(run.art.root);
  for (auto st : all_stages()) {
    if (!wanted.count(st)) continue;
    switch (st) {
      case Stage::ingest: run.report.stages.push_back(run.ingest()); break;
      case Stage::situations: run.report.stages.push_back(run.situations()); break;
      case Stage::context: run.report.stages.push_back(run.context()); break;
      case Stage::queries: run.report.stages.push_back(run.queries()); break;
      case Stage::qa: run.report.stages.push_back(run.qa()); break;
      case Stage::stats: run.report.stages.push_back(run.stats()); break;
      case Stage::eval: run.report.stages.push_back(run.eval()); break;
    }
  }
  return run.report;
}

// --- review tasks -------------------------------------------------------------------------------

namespace {

const ObjectInstance* task_object(const ScanPair& pair, const ChangeRecord& c) {
  if (c.object_id_curr) return pair.curr.find(*c.object_id_curr);
  return pair.prev.find(*c.object_id_prev);
}

ordered_json obb_json(const Obb& b) {
  return {{"center", detail::vec3_to(b.center)},
          {"half_extents", detail::vec3_to(b.half_extents)},
          {"yaw", b.yaw}};
}

ordered_json feature_json(const FeatureCandidate& f) {
  ordered_json j;
  j["feature_id"] = f.feature_id();
  j["kind"] = to_string(f.kind);
  j["text"] = f.text_fragment;
  j["tense"] = to_string(f.tense);
  if (f.landmark_id) j["landmark_id"] = *f.landmark_id;
  return j;
}

}  // namespace

std::vector<QueryTask> ReviewTask::query_tasks() const {
  if (change == ChangeKind::added || change == ChangeKind::removed) return {QueryTask::description};
  return {QueryTask::description, QueryTask::rearrangement};
}

namespace {

std::string render_for(const ReviewTask& task, const ScanPair& pair, const FeatureCandidate& f, QueryTask t) {
  const SceneScan* scan = &pair.curr;
  if (f.tense == Tense::past || (f.kind == FeatureKind::manual && pair.curr.find(task.object_id) == nullptr)) {
    scan = &pair.prev;
  }
  const std::size_t n = scan->count_label(task.label);
  return render_query(task.label, f, n, t, query_variant(pair.pair_id, task.object_id, f.feature_id(), t));
}

}  // namespace

std::string ReviewTask::query(const ScanPair& pair, QueryTask t) const {
  if (!resolved) throw ValidationError("task " + task_id + " has no resolved feature");
  return render_for(*this, pair, *resolved, t);
}

std::vector<ReviewTask> review_tasks(const ScanPair& pair, const std::map<std::string, ObjectReview>& review,
                                     const QueryConfig& qcfg, const GeometryConfig& geo) {
  const auto lm_curr = find_landmarks(pair.curr, qcfg);
  const auto lm_prev = find_landmarks(pair.prev, qcfg);
  std::vector<ReviewTask> out;
  for (const auto& c : pair.changes) {
    const auto* obj = task_object(pair, c);
    if (obj == nullptr) continue;
    ReviewTask t;
    t.pair_id = pair.pair_id;
    t.object_id = c.any_id();
    t.task_id = review_task_id(pair.pair_id, t.object_id);
    t.label = obj->label;
    t.change = c.kind;
    std::vector<FeatureCandidate> all;
    if (c.object_id_curr) all = candidate_features(*c.object_id_curr, pair.curr, lm_curr, Tense::present, geo);
    if (c.object_id_prev) {
      for (auto f : candidate_features(*c.object_id_prev, pair.prev, lm_prev, Tense::past, geo)) {
        f.object_id = t.object_id;
        all.push_back(f);
      }
    }
    auto it = review.find(t.task_id);
    const ObjectReview* r = it == review.end() ? nullptr : &it->second;
    if (r) {
      t.version = r->version;
      t.rejected = r->rejected;
    }
    for (const auto& f : all) {
      if (!t.rejected.count(f.feature_id())) t.candidates.push_back(f);
    }
    const auto res = resolve_feature(t.object_id, all, r);
    if (const auto* f = std::get_if<FeatureCandidate>(&res)) {
      t.resolved = *f;
      const bool human = r && (r->manual || (r->accepted && *r->accepted == f->feature_id()));
      t.status = human ? ReviewStatus::human_resolved : ReviewStatus::auto_resolved;
    } else {
      t.status = ReviewStatus::pending;
    }
    out.push_back(std::move(t));
  }
  return out;
}

nlohmann::ordered_json review_task_json(const ReviewTask& task, const ScanPair& pair, bool detail) {
  ordered_json j;
  j["task_id"] = task.task_id;
  j["scan_pair_id"] = task.pair_id;
  j["object_id"] = task.object_id;
  j["label"] = task.label;
  j["change"] = to_string(task.change);
  j["status"] = to_string(task.status);
  j["version"] = task.version;
  ordered_json cands = ordered_json::array();
  for (const auto& f : task.candidates) {
    ordered_json c = feature_json(f);
    if (detail) {
      ordered_json previews;
      for (auto qt : task.query_tasks()) previews[to_string(qt)] = render_for(task, pair, f, qt);
      c["previews"] = previews;
    }
    cands.push_back(std::move(c));
  }
  j["candidates"] = cands;
  ordered_json rejected = ordered_json::array();
  for (const auto& [id, reason] : task.rejected) rejected.push_back({{"feature_id", id}, {"reason", reason}});
  j["rejected"] = rejected;
  j["resolved"] = task.resolved ? feature_json(*task.resolved) : ordered_json(nullptr);
  ordered_json queries = ordered_json::object();
  if (task.resolved) {
    for (auto qt : task.query_tasks()) queries[to_string(qt)] = task.query(pair, qt);
  }
  j["queries"] = queries;
  if (!detail) return j;

  ordered_json geo;
  const ChangeRecord* change = nullptr;
  for (const auto& c : pair.changes) {
    if (c.any_id() == task.object_id) change = &c;
  }
  if (change && change->object_id_prev) {
    if (auto b = pair.aligned_prev_obb(*change->object_id_prev)) geo["prev_obb"] = obb_json(*b);
  }
  if (change && change->object_id_curr) geo["curr_obb"] = obb_json(pair.curr.at(*change->object_id_curr).obb);
  const SceneScan& scan = change && change->object_id_curr ? pair.curr : pair.prev;
  const auto landmarks = find_landmarks(scan);
  ordered_json objects = ordered_json::array();
  for (const auto& o : scan.objects) {
    if (is_structural(o.label)) continue;
    Obb b = o.obb;
    if (&scan == &pair.prev) b = pair.alignment.apply(b);
    ordered_json oj;
    oj["id"] = o.id;
    oj["label"] = o.label;
    oj["obb"] = obb_json(b);
    oj["landmark"] = landmarks.count(o.id) > 0;
    oj["target"] = o.id == task.object_id;
    oj["same_label"] = o.label == task.label;
    objects.push_back(std::move(oj));
  }
  geo["same_label_count"] = scan.count_label(task.label);
  geo["objects"] = objects;
  j["geometry"] = geo;
  return j;
}

}  // namespace situ
