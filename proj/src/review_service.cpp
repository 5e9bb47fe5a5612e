#include "situ/review_service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <ctime>

namespace situ {

using nlohmann::ordered_json;

namespace {

HttpResponse json_response(int status, const ordered_json& j) { return {status, j.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, ordered_json{{"error", message}});
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int status_rank(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::pending: return 0;
    case ReviewStatus::auto_resolved: return 1;
    case ReviewStatus::human_resolved: return 2;
  }
  return 3;
}

}  // namespace

ReviewService::ReviewService(PipelineConfig cfg) : ReviewService(cfg, load_ingested_pairs(cfg)) {}

ReviewService::ReviewService(PipelineConfig cfg, std::vector<ScanPair> pairs)
    : cfg_(std::move(cfg)),
      pairs_(std::move(pairs)),
      art_(cfg_.paths.output_dir),
      lock_(std::make_unique<ReviewLock>(art_.review_log())),
      state_(std::make_unique<ReviewState>(art_.review_log())) {}

ReviewService::~ReviewService() { stop(); }

const ScanPair* ReviewService::find_pair(const std::string& pair_id) const {
  for (const auto& p : pairs_) {
    if (p.pair_id == pair_id) return &p;
  }
  return nullptr;
}

std::vector<ReviewTask> ReviewService::all_tasks() const {
  const auto snap = state_->snapshot();
  std::vector<ReviewTask> out;
  for (const auto& p : pairs_) {
    auto t = review_tasks(p, snap, cfg_.query, cfg_.geometry);
    std::move(t.begin(), t.end(), std::back_inserter(out));
  }
  std::stable_sort(out.begin(), out.end(), [](const ReviewTask& a, const ReviewTask& b) {
    return status_rank(a.status) < status_rank(b.status);
  });
  return out;
}

std::optional<ReviewTask> ReviewService::find_task(const std::string& task_id) const {
  const auto colon = task_id.rfind(':');
  if (colon == std::string::npos) return std::nullopt;
  const auto* pair = find_pair(task_id.substr(0, colon));
  if (pair == nullptr) return std::nullopt;
  for (auto& t : review_tasks(*pair, state_->snapshot(), cfg_.query, cfg_.geometry)) {
    if (t.task_id == task_id) return t;
  }
  return std::nullopt;
}

HttpResponse ReviewService::list_tasks(const std::string& status_filter) const {
  std::optional<ReviewStatus> want;
  if (!status_filter.empty()) {
    want = review_status_from_string(status_filter);
    if (!want) return error_response(400, "unknown status '" + status_filter + "'");
  }
  ordered_json tasks = ordered_json::array();
  for (const auto& t : all_tasks()) {
    if (want && t.status != *want) continue;
    tasks.push_back(review_task_json(t, *find_pair(t.pair_id), false));
  }
  return json_response(200, ordered_json{{"tasks", tasks}});
}

HttpResponse ReviewService::get_task(const std::string& task_id) const {
  const auto t = find_task(task_id);
  if (!t) return error_response(404, "unknown task " + task_id);
  return json_response(200, review_task_json(*t, *find_pair(t->pair_id), true));
}

HttpResponse ReviewService::post_decision(const std::string& task_id, const std::string& body) {
  const auto task = find_task(task_id);
  if (!task) return error_response(404, "unknown task " + task_id);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  }
  if (j.is_object()) {
    j["task_id"] = task_id;
    if (j.value("author", "").empty()) j["author"] = "reviewer";
    j["timestamp"] = utc_now();
  }
  Decision d;
  try {
    d = Decision::from_json(j);
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  if (d.action != DecisionAction::manual) {
    const auto& cands = task->candidates;
    const bool known = std::any_of(cands.begin(), cands.end(),
                                   [&](const FeatureCandidate& f) { return f.feature_id() == d.feature_id; });
    if (!known) return error_response(400, "feature " + d.feature_id + " is not a candidate of " + task_id);
  }
  try {
    state_->apply(d);
  } catch (const VersionConflict& e) {
    return json_response(409, ordered_json{{"error", e.what()}, {"version", e.actual()}});
  } catch (const ValidationError& e) {
    return error_response(400, e.what());
  }
  return get_task(task_id);
}

HttpResponse ReviewService::regen() {
  std::lock_guard lock(regen_mu_);
  const auto snap = state_->snapshot();
  RunOptions opts;
  opts.stages = {Stage::queries};
  opts.review = &snap;
  try {
    const auto rep = run_pipeline(cfg_, opts);
    std::map<std::string, std::size_t> counts{{"pending", 0}, {"auto_resolved", 0}, {"human_resolved", 0}};
    for (const auto& t : all_tasks()) ++counts[to_string(t.status)];
    ordered_json j;
    j["queries"] = rep.stages.front().records;
    j["tasks"] = counts;
    return json_response(200, j);
  } catch (const MissingArtifact& e) {
    return error_response(412, e.what());
  } catch (const Error& e) {
    return error_response(500, e.what());
  }
}

int ReviewService::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  auto& svr = *server_;
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, "application/json");
  };
  svr.Get("/tasks", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, list_tasks(req.has_param("status") ? req.get_param_value("status") : ""));
  });
  svr.Get(R"(/tasks/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_task(req.matches[1]));
  });
  svr.Post(R"(/tasks/([^/]+)/decision)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, post_decision(req.matches[1], req.body));
  });
  svr.Post("/regen", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, regen()); });
  svr.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  svr.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      reply(res, error_response(500, e.what()));
    }
  });
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
  } else if (!svr.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    server_.reset();
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void ReviewService::serve() {
  if (!server_) throw Error("review service is not bound");
  server_->listen_after_bind();
}

void ReviewService::stop() {
  if (server_) server_->stop();
}

}  // namespace situ
