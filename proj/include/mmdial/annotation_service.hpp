#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mmdial/builder.hpp"
#include "mmdial/calibrate.hpp"

namespace mmdial {

// Append-only annotation CSV, same format calibrate reads. Each append is
// flushed and fsync'd before it returns.
class AnnotationLog {
 public:
  explicit AnnotationLog(std::filesystem::path path);
  ~AnnotationLog();
  AnnotationLog(const AnnotationLog&) = delete;
  AnnotationLog& operator=(const AnnotationLog&) = delete;

  const std::filesystem::path& path() const { return path_; }
  // Records already on disk at open time.
  std::vector<AnnotationRecord> replay() const;
  void append(const AnnotationRecord& record);

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

// The served instance set plus accepted answers. Thread-safe.
class AnnotationSession {
 public:
  enum class Submit { kAccepted, kDuplicate, kUnknownInstance };

  struct Progress {
    std::size_t answered = 0;
    std::size_t total = 0;
  };

  // Replays `log_path` so answers acknowledged before a restart stay counted.
  AnnotationSession(std::vector<Instance> sample, const std::filesystem::path& log_path);

  std::size_t size() const { return sample_.size(); }
  const std::vector<Instance>& sample() const { return sample_; }

  // First `limit` instances the annotator has not answered, in sample order.
  std::vector<const Instance*> batch(const std::string& annotator, std::size_t limit) const;
  Progress progress(const std::string& annotator) const;

  // Throws RangeError on out-of-range scores. The record is durable on disk
  // before kAccepted is returned.
  Submit submit(const AnnotationRecord& record);

 private:
  std::vector<Instance> sample_;
  std::unordered_map<std::string, std::size_t> position_;
  AnnotationLog log_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::unordered_set<std::string>> answered_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> ui_dir;
  std::string image_base;  // prefixed to image ids to form image_ref
};

// HTTP front end over an AnnotationSession:
//   GET  /api/batch?annotator=<id>&limit=<n>
//   POST /api/answer
//   GET  /api/progress?annotator=<id>
//   GET  /  (static UI assets, when ui_dir is set)
class AnnotationServer {
 public:
  AnnotationServer(AnnotationSession& session, ServerOptions options);
  ~AnnotationServer();

  // Binds and returns the bound port. Throws Error on bind failure.
  int bind();
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mmdial
