#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "situ/config.hpp"
#include "situ/pipeline.hpp"
#include "situ/review.hpp"
#include "situ/scene.hpp"

namespace httplib {
class Server;
}

namespace situ {

struct HttpResponse {
  int status{200};
  std::string body;  // JSON
};

// Review API over the ingested pairs and the decision log under the output directory:
//   GET  /tasks[?status=pending|auto_resolved|human_resolved]
//   GET  /tasks/{id}
//   POST /tasks/{id}/decision  {action, feature | text, reason, author, version}
//   POST /regen                reruns the queries stage with the current decisions
// Holds the log's writer lock for its lifetime, so a second service on the same store throws
// LockContention.
class ReviewService {
 public:
  explicit ReviewService(PipelineConfig cfg);
  ReviewService(PipelineConfig cfg, std::vector<ScanPair> pairs);
  ~ReviewService();

  HttpResponse list_tasks(const std::string& status_filter) const;
  HttpResponse get_task(const std::string& task_id) const;
  HttpResponse post_decision(const std::string& task_id, const std::string& body);
  HttpResponse regen();

  const ReviewState& state() const { return *state_; }

  // Binds `host:port` (port 0 picks a free one) and returns the bound port; throws Error when
  // binding fails.
  int bind(const std::string& host, int port);
  // Serves until stop(); bind() must have succeeded.
  void serve();
  void stop();

 private:
  const ScanPair* find_pair(const std::string& pair_id) const;
  std::optional<ReviewTask> find_task(const std::string& task_id) const;
  std::vector<ReviewTask> all_tasks() const;

  PipelineConfig cfg_;
  std::vector<ScanPair> pairs_;
  Artifacts art_;
  std::unique_ptr<ReviewLock> lock_;
  std::unique_ptr<ReviewState> state_;
  std::mutex regen_mu_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace situ
