#include "situ/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace situ {

using nlohmann::ordered_json;

std::string to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::auto_resolved: return "auto_resolved";
    case ReviewStatus::pending: return "pending";
    case ReviewStatus::human_resolved: return "human_resolved";
  }
  return "pending";
}

std::optional<ReviewStatus> review_status_from_string(const std::string& s) {
  for (auto v : {ReviewStatus::auto_resolved, ReviewStatus::pending, ReviewStatus::human_resolved}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

namespace {

const char* action_name(DecisionAction a) {
  switch (a) {
    case DecisionAction::accept: return "accept";
    case DecisionAction::reject: return "reject";
    case DecisionAction::manual: return "manual";
  }
  return "accept";
}

}  // namespace

ordered_json Decision::to_json() const {
  ordered_json j;
  j["task_id"] = task_id;
  j["action"] = action_name(action);
  if (action == DecisionAction::manual) {
    j["text"] = text;
  } else {
    j["feature"] = feature_id;
  }
  if (action == DecisionAction::reject) j["reason"] = reason;
  j["author"] = author;
  j["timestamp"] = timestamp;
  j["version"] = version;
  return j;
}

Decision Decision::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("decision must be a JSON object");
  Decision d;
  d.task_id = j.value("task_id", "");
  const std::string action = j.value("action", "");
  if (action == "accept") {
    d.action = DecisionAction::accept;
  } else if (action == "reject") {
    d.action = DecisionAction::reject;
  } else if (action == "manual") {
    d.action = DecisionAction::manual;
  } else {
    throw ValidationError("decision action must be accept, reject or manual");
  }
  d.feature_id = j.value("feature", "");
  d.reason = j.value("reason", "");
  d.text = j.value("text", "");
  d.author = j.value("author", "");
  d.timestamp = j.value("timestamp", "");
  if (!j.contains("version") || !j["version"].is_number_integer()) {
    throw ValidationError("decision needs an integer version");
  }
  d.version = j["version"].get<int>();
  if (d.action == DecisionAction::manual && d.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("manual feature text must not be empty");
  }
  if (d.action != DecisionAction::manual && d.feature_id.empty()) {
    throw ValidationError("decision needs a feature id");
  }
  return d;
}

ReviewState::ReviewState(std::filesystem::path log) : log_(std::move(log)) {
  if (!std::filesystem::exists(*log_)) return;
  std::istringstream in(detail::read_file(*log_));
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
      throw ParseError("review log " + log_->string() + ": " + e.what(), start + e.byte);
    }
    apply_locked(Decision::from_json(j));
  }
}

ReviewState ReviewState::replay(const std::filesystem::path& log) { return ReviewState(log); }

ObjectReview ReviewState::apply_locked(const Decision& d) {
  if (d.task_id.empty()) throw ValidationError("decision without task id");
  if (d.action == DecisionAction::manual && d.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("manual feature text must not be empty");
  }
  if (d.action != DecisionAction::manual && d.feature_id.empty()) {
    throw ValidationError("decision needs a feature id");
  }
  auto it = tasks_.find(d.task_id);
  ObjectReview next = it == tasks_.end() ? ObjectReview{} : it->second;
  if (d.version != next.version) throw VersionConflict(d.task_id, d.version, next.version);
  switch (d.action) {
    case DecisionAction::accept:
      next.accepted = d.feature_id;
      next.manual.reset();
      next.rejected.erase(d.feature_id);
      break;
    case DecisionAction::reject:
      next.rejected[d.feature_id] = d.reason;
      if (next.accepted == d.feature_id) next.accepted.reset();
      break;
    case DecisionAction::manual:
      next.manual = ManualFeature{d.text, d.author, d.timestamp};
      next.accepted.reset();
      break;
  }
  ++next.version;
  tasks_[d.task_id] = next;
  return next;
}

ObjectReview ReviewState::apply(const Decision& d) {
  std::lock_guard lock(mu_);
  const auto before = tasks_;
  ObjectReview out = apply_locked(d);
  if (log_) {
    std::ofstream out_log(*log_, std::ios::app | std::ios::binary);
    out_log << d.to_json().dump() << "\n";
    out_log.flush();
    if (!out_log) {
      tasks_ = before;
      throw Error("cannot append to review log " + log_->string());
    }
  }
  return out;
}

std::optional<ObjectReview> ReviewState::get(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

int ReviewState::version(const std::string& task_id) const {
  auto r = get(task_id);
  return r ? r->version : 0;
}

std::map<std::string, ObjectReview> ReviewState::snapshot() const {
  std::lock_guard lock(mu_);
  return tasks_;
}

ReviewLock::ReviewLock(const std::filesystem::path& log) : path_(log) {
  path_ += ".lock";
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw LockContention("review store " + log.string() + " is already held by another writer (" +
                           path_.string() + ")");
    }
    throw Error("cannot create " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

ReviewLock::~ReviewLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace situ
