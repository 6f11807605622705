#pragma once

// Annotation task service: per-query labelling sessions backed by an
// append-only JSON-lines event log with periodic snapshots.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "agepost/pipeline.hpp"
#include "agepost/posterior.hpp"
#include "agepost/serialize.hpp"

namespace agepost {

enum class TaskStatus { Open, Finalized, Discarded };
std::string_view to_string(TaskStatus s);

struct AnnotationTask {
  std::string task_id;
  QueryItem query;
  TaskStatus status = TaskStatus::Open;
  std::vector<ComparisonEvent> events;
  // Chosen once at creation; the pending queue is references[events.size():].
  std::vector<ReferenceItem> references;
  std::uint64_t created_seq = 0;
  std::string created_at;
  std::string updated_at;
  std::optional<AnnotationRecord> record;

  std::size_t remaining() const noexcept { return references.size() - events.size(); }
};

enum class LogKind { TaskCreated, ComparisonSubmitted, TaskFinalized, TaskDiscarded };
std::string_view to_string(LogKind k);

struct LogEntry {
  std::uint64_t seq = 0;
  LogKind kind = LogKind::TaskCreated;
  Json payload;
};

// Single-writer append-only log. Each append is flushed (and fsync'd when
// enabled) before it returns.
class EventLog {
 public:
  EventLog(std::filesystem::path path, bool sync);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  std::uint64_t append(LogKind kind, const Json& payload);
  std::uint64_t last_seq() const;
  const std::filesystem::path& path() const noexcept { return path_; }

  // Reads every complete entry, dropping a torn final line. Throws DataError
  // on malformed interior lines or sequence gaps.
  static std::vector<LogEntry> read_all(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  bool sync_;
  int fd_ = -1;
  std::uint64_t last_seq_ = 0;
  mutable std::mutex mutex_;
};

struct ServiceConfig {
  AgeGrid grid;
  double beta = kDefaultBeta;
  SelectionPolicy policy;
  std::filesystem::path data_dir;
  std::size_t snapshot_every = 1000;
  bool fsync = true;
  // Timestamp source; defaults to UTC wall clock in ISO-8601.
  std::function<std::string()> clock;
};

struct PosteriorSummary {
  std::string task_id;
  AgeDistribution posterior;
  int mode = 0;
  ConfidenceInterval ci90;
  std::size_t remaining = 0;
  TaskStatus status = TaskStatus::Open;
};

class AnnotationService {
 public:
  // Opens (or creates) data_dir, restores state from snapshot + log.
  AnnotationService(ServiceConfig config, std::vector<ReferenceItem> pool);
  ~AnnotationService();

  AnnotationTask create_task(const QueryItem& query);
  AnnotationTask get_task(const std::string& task_id) const;
  std::vector<AnnotationTask> list_tasks(std::optional<TaskStatus> status = std::nullopt) const;
  // Head of the pending queue, or nullopt when exhausted.
  std::optional<ReferenceItem> next_comparison(const std::string& task_id) const;
  PosteriorSummary submit_comparison(const std::string& task_id, const std::string& ref_id,
                                     Outcome outcome, const std::string& annotator_id);
  PosteriorSummary summary(const std::string& task_id) const;
  AnnotationRecord finalize_task(const std::string& task_id, bool force = false);
  // Finalized records (plus Discarded ones if requested) in creation order.
  std::vector<AnnotationRecord> export_records(bool include_discarded) const;

  std::uint64_t last_seq() const;
  std::size_t task_count() const;
  // Full state for equality checks between live and recovered services.
  Json state_json() const;
  void write_snapshot();

  const ServiceConfig& config() const noexcept { return config_; }
  const std::filesystem::path& log_path() const;
  const std::filesystem::path& snapshot_path() const noexcept { return snapshot_path_; }

 private:
  struct TaskSlot {
    mutable std::mutex mutex;
    AnnotationTask task;
  };

  TaskSlot& slot(const std::string& task_id) const;
  PosteriorSummary summarize(const AnnotationTask& task) const;
  void apply(const LogEntry& entry);
  void restore();
  void maybe_snapshot(std::uint64_t seq);
  std::string now() const;

  ServiceConfig config_;
  LogisticModel model_;
  AgeDistribution prior_;
  std::vector<ReferenceItem> pool_;
  std::filesystem::path snapshot_path_;
  std::unique_ptr<EventLog> log_;

  mutable std::shared_mutex tasks_mutex_;
  std::map<std::string, std::unique_ptr<TaskSlot>> tasks_;
  std::map<std::string, std::string> query_to_task_;
  std::vector<std::string> creation_order_;
  std::uint64_t next_task_number_ = 1;
  std::uint64_t last_snapshot_seq_ = 0;
  std::mutex snapshot_mutex_;
};

Json task_to_json(const AnnotationTask& task);
AnnotationTask task_from_json(const Json& j);
Json summary_to_json(const PosteriorSummary& s);

std::string utc_timestamp();

}  // namespace agepost
