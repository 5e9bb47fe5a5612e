#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/common.hpp"

namespace situ {

enum class ReviewStatus { auto_resolved, pending, human_resolved };
std::string to_string(ReviewStatus s);
std::optional<ReviewStatus> review_status_from_string(const std::string& s);

struct ManualFeature {
  std::string text;
  std::string author;
  std::string timestamp;
};

struct ObjectReview {
  std::optional<std::string> accepted;             // feature id
  std::map<std::string, std::string> rejected;     // feature id -> reason
  std::optional<ManualFeature> manual;
  int version{0};

  bool human_resolved() const { return accepted.has_value() || manual.has_value(); }
};

enum class DecisionAction { accept, reject, manual };

struct Decision {
  std::string task_id;
  DecisionAction action{DecisionAction::accept};
  std::string feature_id;  // accept / reject
  std::string reason;      // reject
  std::string text;        // manual
  std::string author;
  std::string timestamp;
  int version{0};  // version the reviewer saw

  nlohmann::ordered_json to_json() const;
  static Decision from_json(const nlohmann::json& j);
};

class VersionConflict : public Error {
 public:
  VersionConflict(const std::string& task, int expected, int actual)
      : Error("version conflict on " + task + ": expected " + std::to_string(expected) +
              ", store is at " + std::to_string(actual)),
        actual_(actual) {}
  int actual() const { return actual_; }

 private:
  int actual_;
};

// Decision store replayed from an append-only JSONL log. Thread-safe; one process may hold the
// log open for writing at a time (see ReviewLock).
class ReviewState {
 public:
  ReviewState() = default;
  explicit ReviewState(std::filesystem::path log);

  // Validates, applies and (when backed by a log) appends. Throws VersionConflict or
  // ValidationError.
  ObjectReview apply(const Decision& d);
  std::optional<ObjectReview> get(const std::string& task_id) const;
  int version(const std::string& task_id) const;
  std::map<std::string, ObjectReview> snapshot() const;

  static ReviewState replay(const std::filesystem::path& log);

 private:
  ObjectReview apply_locked(const Decision& d);

  std::optional<std::filesystem::path> log_;
  std::map<std::string, ObjectReview> tasks_;
  mutable std::mutex mu_;
};

// Exclusive writer lock next to the log (created with O_EXCL, removed on destruction).
class ReviewLock {
 public:
  explicit ReviewLock(const std::filesystem::path& log);
  ~ReviewLock();
  ReviewLock(const ReviewLock&) = delete;
  ReviewLock& operator=(const ReviewLock&) = delete;

 private:
  std::filesystem::path path_;
};

class LockContention : public Error {
 public:
  using Error::Error;
};

}  // namespace situ
