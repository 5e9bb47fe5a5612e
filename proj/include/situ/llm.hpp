#pragma once

#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/common.hpp"
#include "situ/config.hpp"
#include "situ/eval.hpp"

namespace situ {

enum class TemplateId {
  situation_expand,
  longform_gen,
  query_paraphrase,
  qa_gen,
  judge_general,
  judge_direction,
  judge_longform,
};

std::string to_string(TemplateId t);
TemplateId template_id_from_string(const std::string& s);
TemplateId judge_template(Rubric r);

struct Message {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

using Messages = std::vector<Message>;

nlohmann::ordered_json to_json(const Messages& messages);

// Top-level payload keys each template requires.
const std::vector<std::string>& payload_fields(TemplateId t);

// System instruction, the template's worked examples as user/assistant turns, then the payload
// as a fenced JSON block in the final user turn. Throws ValidationError naming a missing field.
Messages render_prompt(TemplateId t, const nlohmann::ordered_json& payload);

struct DecodingParams {
  double temperature{0.0};
  int max_tokens{1024};

  nlohmann::ordered_json to_json() const;
};

class NoCredentials : public Error {
 public:
  using Error::Error;
};

class RemoteError : public Error {
 public:
  RemoteError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class RateLimited : public Error {
 public:
  RateLimited(const std::string& what, double retry_after_s)
      : Error(what), retry_after_s_(retry_after_s) {}
  double retry_after_s() const { return retry_after_s_; }

 private:
  double retry_after_s_;
};

class UnparseableRating : public Error {
 public:
  UnparseableRating(const std::string& what, std::string last_response)
      : Error(what), last_response_(std::move(last_response)) {}
  const std::string& last_response() const { return last_response_; }

 private:
  std::string last_response_;
};

struct HttpReply {
  int status{0};  // 0 when the request never got a response
  std::string body;
  std::optional<double> retry_after_s;
  std::string error;
};

// POSTs a chat-completion request body and returns the raw reply. Must be thread-safe.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& body) = 0;
};

class HttpTransport : public Transport {
 public:
  HttpTransport(std::string base_url, std::string endpoint, std::string api_key, double timeout_s);
  HttpReply post(const std::string& body) override;

 private:
  std::string base_url_;
  std::string endpoint_;
  std::string api_key_;
  double timeout_s_;
};

struct CompletionRecord {
  std::string key;
  std::string template_id;
  std::string model;
  DecodingParams params;
  Messages messages;
  std::string response;
  int prompt_tokens{0};
  int completion_tokens{0};
  std::string timestamp;

  nlohmann::ordered_json to_json() const;
  static CompletionRecord from_json(const nlohmann::json& j);
};

// SHA-256 over template id, rendered messages, model and decoding parameters.
std::string cache_key(const std::string& template_id, const Messages& messages,
                      const std::string& model, const DecodingParams& params);

struct ClientOptions {
  std::string model;
  int concurrency{4};
  double rate_per_s{2.0};  // <= 0 disables the limiter
  int max_retries{3};
  double backoff_s{0.5};
};

// Cached, rate-limited chat-completion client. Shareable across threads. Without a transport it
// runs offline and serves only cache hits.
class LlmClient {
 public:
  using Sleeper = std::function<void(double seconds)>;

  LlmClient(ClientOptions opts, std::filesystem::path cache_dir, std::shared_ptr<Transport> transport,
            Sleeper sleep = {});

  std::string complete(const std::string& template_id, const Messages& messages,
                       const DecodingParams& params);
  std::string complete(TemplateId t, const nlohmann::ordered_json& payload, const DecodingParams& params);

  const std::string& model() const { return opts_.model; }
  bool offline() const { return !transport_; }
  std::size_t remote_calls() const;
  std::size_t cache_hits() const;
  int max_in_flight() const;

 private:
  std::optional<CompletionRecord> read_cache(const std::string& key) const;
  void write_cache(const CompletionRecord& rec) const;
  CompletionRecord fetch(const std::string& key, const std::string& template_id, const Messages& messages,
                         const DecodingParams& params);
  void admit();
  void acquire_slot();
  void release_slot();

  ClientOptions opts_;
  std::filesystem::path cache_dir_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleep_;

  mutable std::mutex mu_;
  std::condition_variable slot_cv_;
  int in_flight_{0};
  int max_in_flight_{0};
  std::size_t remote_calls_{0};
  std::size_t cache_hits_{0};
  std::map<std::string, std::shared_future<std::string>> pending_;

  std::mutex limiter_mu_;
  double next_admit_s_{0.0};
};

// Reads the API key from the configured environment variable; `offline` or a missing key gives a
// cache-only client.
std::unique_ptr<LlmClient> make_client(const GatewayConfig& cfg, const std::filesystem::path& cache_dir,
                                       const std::string& model, bool offline);

// First standalone integer 1..5 in the text ("5", "Score: 4", "4/5").
std::optional<int> extract_rating(const std::string& text);

// Rater backed by the judge rubrics. Unparseable replies are re-prompted once.
class LlmJudge : public Rater {
 public:
  LlmJudge(LlmClient& client, DecodingParams params, int concurrency);

  int rate(const RatingRequest& req) override;
  std::vector<int> rate_all(const std::vector<RatingRequest>& reqs) override;
  std::string id() const override { return "llm:" + client_.model(); }

 private:
  LlmClient& client_;
  DecodingParams params_;
  int concurrency_;
};

}  // namespace situ
