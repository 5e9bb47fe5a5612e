#include "situ/llm.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <httplib.h>

#include "json_util.hpp"
#include "prompt_text.hpp"
#include "situ/hash.hpp"

namespace situ {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct TemplateInfo {
  TemplateId id;
  const char* name;
  std::string_view system;
  std::vector<std::pair<std::string_view, std::string_view>> examples;
  // field name -> expected JSON kind
  std::vector<std::pair<std::string, json::value_t>> fields;
};

const std::vector<TemplateInfo>& templates() {
  namespace p = prompt_text;
  using vt = json::value_t;
  static const std::vector<TemplateInfo> kTemplates = {
      {TemplateId::situation_expand,
       "situation_expand",
       p::kSituationSystem,
       {{p::kSituationUserSit, p::kSituationAssistantSit},
        {p::kSituationUserInteract, p::kSituationAssistantInteract},
        {p::kSituationUserStand, p::kSituationAssistantStand}},
       {{"brief_situation", vt::string}, {"objects", vt::object}}},
      {TemplateId::longform_gen,
       "longform_gen",
       p::kLongformSystem,
       {{p::kLongformUser, p::kLongformAssistant}},
       {{"brief_situation", vt::string}, {"objects", vt::object}}},
      {TemplateId::query_paraphrase,
       "query_paraphrase",
       p::kQuerySystem,
       {{p::kQueryUserPre, p::kQueryAssistantPre}, {p::kQueryUserPost, p::kQueryAssistantPost}},
       {{"object", vt::string}, {"tense", vt::string}, {"num", vt::number_unsigned}, {"features", vt::array}}},
      {TemplateId::qa_gen, "qa_gen", p::kQaSystem, {{p::kQaUser, p::kQaAssistant}}, {{"objects", vt::object}}},
      {TemplateId::judge_general,
       "judge_general",
       p::kJudgeGeneral,
       {},
       {{"question", vt::string}, {"ground_truth", vt::string}, {"response", vt::string}}},
      {TemplateId::judge_direction,
       "judge_direction",
       p::kJudgeDirection,
       {},
       {{"question", vt::string}, {"ground_truth", vt::string}, {"response", vt::string}}},
      {TemplateId::judge_longform,
       "judge_longform",
       p::kJudgeLongform,
       {},
       {{"question", vt::string}, {"ground_truth", vt::string}, {"response", vt::string}}},
  };
  return kTemplates;
}

const TemplateInfo& info(TemplateId t) {
  for (const auto& i : templates()) {
    if (i.id == t) return i;
  }
  throw ValidationError("unknown template");
}

bool kind_matches(const ordered_json& v, json::value_t want) {
  switch (want) {
    case json::value_t::string: return v.is_string();
    case json::value_t::object: return v.is_object();
    case json::value_t::array: return v.is_array();
    case json::value_t::number_unsigned: return v.is_number_integer() && v.get<long long>() >= 0;
    default: return true;
  }
}

const char* kind_name(json::value_t want) {
  switch (want) {
    case json::value_t::string: return "a string";
    case json::value_t::object: return "an object";
    case json::value_t::array: return "an array";
    case json::value_t::number_unsigned: return "a non-negative integer";
    default: return "a value";
  }
}

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Messages messages_from_json(const json& j) {
  Messages out;
  for (const auto& m : j) out.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  return out;
}

}  // namespace

std::string to_string(TemplateId t) { return info(t).name; }

TemplateId template_id_from_string(const std::string& s) {
  for (const auto& i : templates()) {
    if (s == i.name) return i.id;
  }
  throw ValidationError("unknown template id '" + s + "'");
}

TemplateId judge_template(Rubric r) {
  switch (r) {
    case Rubric::general: return TemplateId::judge_general;
    case Rubric::direction: return TemplateId::judge_direction;
    case Rubric::longform: return TemplateId::judge_longform;
  }
  return TemplateId::judge_general;
}

ordered_json to_json(const Messages& messages) {
  ordered_json arr = ordered_json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

const std::vector<std::string>& payload_fields(TemplateId t) {
  static const auto kFields = [] {
    std::map<TemplateId, std::vector<std::string>> m;
    for (const auto& i : templates()) {
      for (const auto& [name, kind] : i.fields) m[i.id].push_back(name);
    }
    return m;
  }();
  return kFields.at(t);
}

Messages render_prompt(TemplateId t, const ordered_json& payload) {
  const auto& ti = info(t);
  if (!payload.is_object()) throw ValidationError(std::string(ti.name) + " payload must be a JSON object");
  for (const auto& [name, kind] : ti.fields) {
    if (!payload.contains(name)) {
      throw ValidationError(std::string(ti.name) + " payload is missing field '" + name + "'");
    }
    if (!kind_matches(payload[name], kind)) {
      throw ValidationError(std::string(ti.name) + " payload field '" + name + "' must be " + kind_name(kind));
    }
  }
  Messages out;
  out.push_back({"system", std::string(ti.system)});
  for (const auto& [user, assistant] : ti.examples) {
    out.push_back({"user", std::string(user)});
    out.push_back({"assistant", std::string(assistant)});
  }
  const std::string body = payload.dump(2, ' ', false, json::error_handler_t::replace);
  // The fence is longer than any backtick run inside the payload so data cannot close it.
  std::size_t run = 0;
  std::size_t longest = 0;
  for (char c : body) {
    run = c == '`' ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  const std::string fence(std::max<std::size_t>(3, longest + 1), '`');
  out.push_back({"user", fence + "json\n" + body + "\n" + fence});
  return out;
}

ordered_json DecodingParams::to_json() const {
  return {{"temperature", temperature}, {"max_tokens", max_tokens}};
}

// --- transport --------------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url, std::string endpoint, std::string api_key, double timeout_s)
    : base_url_(std::move(base_url)),
      endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      timeout_s_(timeout_s) {}

HttpReply HttpTransport::post(const std::string& body) {
  httplib::Client cli(base_url_);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s_ * 1000.0));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
  auto res = cli.Post(endpoint_, headers, body, "application/json");
  HttpReply reply;
  if (!res) {
    reply.error = httplib::to_string(res.error());
    return reply;
  }
  reply.status = res->status;
  reply.body = res->body;
  if (res->has_header("Retry-After")) {
    try {
      reply.retry_after_s = std::stod(res->get_header_value("Retry-After"));
    } catch (const std::exception&) {
    }
  }
  return reply;
}

// --- cache ------------------------------------------------------------------------------------

ordered_json CompletionRecord::to_json() const {
  ordered_json j;
  j["key"] = key;
  j["template_id"] = template_id;
  j["model"] = model;
  j["params"] = params.to_json();
  j["messages"] = situ::to_json(messages);
  j["response"] = response;
  j["usage"] = {{"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}};
  j["timestamp"] = timestamp;
  return j;
}

CompletionRecord CompletionRecord::from_json(const json& j) {
  CompletionRecord r;
  r.key = j.at("key").get<std::string>();
  r.template_id = j.value("template_id", "");
  r.model = j.value("model", "");
  if (j.contains("params")) {
    r.params.temperature = j["params"].value("temperature", 0.0);
    r.params.max_tokens = j["params"].value("max_tokens", 1024);
  }
  if (j.contains("messages")) r.messages = messages_from_json(j["messages"]);
  r.response = j.at("response").get<std::string>();
  if (j.contains("usage")) {
    r.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    r.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  r.timestamp = j.value("timestamp", "");
  return r;
}

std::string cache_key(const std::string& template_id, const Messages& messages, const std::string& model,
                      const DecodingParams& params) {
  ordered_json j;
  j["template_id"] = template_id;
  j["messages"] = to_json(messages);
  j["model"] = model;
  j["params"] = params.to_json();
  return sha256_hex(j.dump());
}

// --- client -----------------------------------------------------------------------------------

LlmClient::LlmClient(ClientOptions opts, std::filesystem::path cache_dir, std::shared_ptr<Transport> transport,
                     Sleeper sleep)
    : opts_(std::move(opts)),
      cache_dir_(std::move(cache_dir)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)) {
  if (opts_.concurrency < 1) throw ValidationError("gateway concurrency must be at least 1");
  if (opts_.max_retries < 0) throw ValidationError("gateway max_retries must be non-negative");
  if (!sleep_) {
    sleep_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
}

std::size_t LlmClient::remote_calls() const {
  std::lock_guard lock(mu_);
  return remote_calls_;
}

std::size_t LlmClient::cache_hits() const {
  std::lock_guard lock(mu_);
  return cache_hits_;
}

int LlmClient::max_in_flight() const {
  std::lock_guard lock(mu_);
  return max_in_flight_;
}

std::optional<CompletionRecord> LlmClient::read_cache(const std::string& key) const {
  const auto path = cache_dir_ / key.substr(0, 2) / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    auto rec = CompletionRecord::from_json(json::parse(ss.str()));
    if (rec.key != key) return std::nullopt;
    return rec;
  } catch (const std::exception&) {
    // A damaged entry is treated as a miss and overwritten.
    return std::nullopt;
  }
}

void LlmClient::write_cache(const CompletionRecord& rec) const {
  static std::atomic<unsigned long> counter{0};
  const auto dir = cache_dir_ / rec.key.substr(0, 2);
  std::filesystem::create_directories(dir);
  const auto final_path = dir / (rec.key + ".json");
  std::ostringstream tmp_name;
  tmp_name << rec.key << ".tmp." << ::getpid() << "." << counter.fetch_add(1);
  const auto tmp = dir / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << rec.to_json().dump(2) << "\n";
    if (!out) throw Error("failed while writing cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, final_path);
}

void LlmClient::admit() {
  if (opts_.rate_per_s <= 0.0) return;
  double wait = 0.0;
  {
    std::lock_guard lock(limiter_mu_);
    const double now = now_s();
    const double slot = std::max(now, next_admit_s_);
    next_admit_s_ = slot + 1.0 / opts_.rate_per_s;
    wait = slot - now;
  }
  if (wait > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
}

void LlmClient::acquire_slot() {
  std::unique_lock lock(mu_);
  slot_cv_.wait(lock, [&] { return in_flight_ < opts_.concurrency; });
  ++in_flight_;
  max_in_flight_ = std::max(max_in_flight_, in_flight_);
}

void LlmClient::release_slot() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  slot_cv_.notify_one();
}

CompletionRecord LlmClient::fetch(const std::string& key, const std::string& template_id, const Messages& messages,
                                  const DecodingParams& params) {
  ordered_json body;
  body["model"] = opts_.model;
  body["messages"] = to_json(messages);
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  const std::string payload = body.dump();

  for (int attempt = 0;; ++attempt) {
    admit();
    acquire_slot();
    HttpReply reply;
    try {
      {
        std::lock_guard lock(mu_);
        ++remote_calls_;
      }
      reply = transport_->post(payload);
    } catch (...) {
      release_slot();
      throw;
    }
    release_slot();

    const bool last = attempt >= opts_.max_retries;
    const double backoff = opts_.backoff_s * std::pow(2.0, attempt);
    if (reply.status == 200) {
      CompletionRecord rec;
      try {
        const json j = json::parse(reply.body);
        rec.response = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
          rec.prompt_tokens = j["usage"].value("prompt_tokens", 0);
          rec.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
      } catch (const std::exception& e) {
        throw RemoteError(std::string("malformed completion response: ") + e.what(), reply.status);
      }
      rec.key = key;
      rec.template_id = template_id;
      rec.model = opts_.model;
      rec.params = params;
      rec.messages = messages;
      rec.timestamp = utc_timestamp();
      return rec;
    }
    if (reply.status == 429) {
      const double retry_after = reply.retry_after_s.value_or(backoff);
      if (last) {
        throw RateLimited("rate limited by completion service after " + std::to_string(attempt + 1) + " attempts",
                          retry_after);
      }
      sleep_(std::max(retry_after, backoff));
      continue;
    }
    const bool transient = reply.status == 0 || reply.status >= 500;
    if (!transient || last) {
      std::string what = "completion request failed";
      if (reply.status) what += " with HTTP " + std::to_string(reply.status);
      if (!reply.error.empty()) what += ": " + reply.error;
      if (transient) what += " after " + std::to_string(attempt + 1) + " attempts";
      throw RemoteError(what, reply.status);
    }
    sleep_(backoff);
  }
}

std::string LlmClient::complete(const std::string& template_id, const Messages& messages,
                                const DecodingParams& params) {
  const std::string key = cache_key(template_id, messages, opts_.model, params);
  if (auto rec = read_cache(key)) {
    std::lock_guard lock(mu_);
    ++cache_hits_;
    return rec->response;
  }

  std::promise<std::string> promise;
  std::shared_future<std::string> fut;
  bool leader = false;
  {
    std::lock_guard lock(mu_);
    auto it = pending_.find(key);
    if (it != pending_.end()) {
      fut = it->second;
      ++cache_hits_;
    } else {
      fut = promise.get_future().share();
      pending_.emplace(key, fut);
      leader = true;
    }
  }
  if (!leader) return fut.get();

  auto finish = [&] {
    std::lock_guard lock(mu_);
    pending_.erase(key);
  };
  try {
    std::string text;
    if (auto rec = read_cache(key)) {
      text = rec->response;
      std::lock_guard lock(mu_);
      ++cache_hits_;
    } else {
      if (!transport_) {
        throw NoCredentials("no completion service credentials and no cached response for " + template_id +
                            " (key " + key + ")");
      }
      const auto rec2 = fetch(key, template_id, messages, params);
      write_cache(rec2);
      text = rec2.response;
    }
    promise.set_value(text);
    finish();
    return text;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
}

std::string LlmClient::complete(TemplateId t, const ordered_json& payload, const DecodingParams& params) {
  return complete(to_string(t), render_prompt(t, payload), params);
}

std::unique_ptr<LlmClient> make_client(const GatewayConfig& cfg, const std::filesystem::path& cache_dir,
                                       const std::string& model, bool offline) {
  std::shared_ptr<Transport> transport;
  if (!offline) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (key && *key) transport = std::make_shared<HttpTransport>(cfg.base_url, cfg.endpoint, key, cfg.timeout_s);
  }
  ClientOptions opts;
  opts.model = model;
  opts.concurrency = cfg.concurrency;
  opts.rate_per_s = cfg.rate_per_s;
  opts.max_retries = cfg.max_retries;
  opts.backoff_s = cfg.backoff_s;
  return std::make_unique<LlmClient>(opts, cache_dir, transport);
}

// --- judge ------------------------------------------------------------------------------------

std::optional<int> extract_rating(const std::string& text) {
  static const std::regex kRating(R"((^|[^0-9.])([1-5])(?![0-9]|\.[0-9]))");
  std::smatch m;
  if (!std::regex_search(text, m, kRating)) return std::nullopt;
  return m[2].str()[0] - '0';
}

LlmJudge::LlmJudge(LlmClient& client, DecodingParams params, int concurrency)
    : client_(client), params_(params), concurrency_(std::max(1, concurrency)) {}

int LlmJudge::rate(const RatingRequest& req) {
  const TemplateId t = judge_template(req.rubric);
  ordered_json payload;
  payload["question"] = req.question;
  payload["ground_truth"] = req.reference;
  payload["response"] = req.response;
  Messages messages = render_prompt(t, payload);
  const std::string first = client_.complete(to_string(t), messages, params_);
  if (auto r = extract_rating(first)) return *r;

  messages.push_back({"assistant", first});
  messages.push_back({"user", "Output only the score as a single integer from 1 to 5."});
  const std::string second = client_.complete(to_string(t), messages, params_);
  if (auto r = extract_rating(second)) return *r;
  throw UnparseableRating("judge reply has no rating 1-5 after a re-prompt: \"" + second + "\"", second);
}

std::vector<int> LlmJudge::rate_all(const std::vector<RatingRequest>& reqs) {
  std::vector<int> out(reqs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= reqs.size()) return;
      {
        std::lock_guard lock(err_mu);
        if (first_error) return;
      }
      try {
        out[i] = rate(reqs[i]);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int n = static_cast<int>(std::min<std::size_t>(concurrency_, std::max<std::size_t>(1, reqs.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace situ
