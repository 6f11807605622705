#include "agepost/service.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>

namespace agepost {

std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Open: return "open";
    case TaskStatus::Finalized: return "finalized";
    case TaskStatus::Discarded: break;
  }
  return "discarded";
}

std::string_view to_string(LogKind k) {
  switch (k) {
    case LogKind::TaskCreated: return "TaskCreated";
    case LogKind::ComparisonSubmitted: return "ComparisonSubmitted";
    case LogKind::TaskFinalized: return "TaskFinalized";
    case LogKind::TaskDiscarded: break;
  }
  return "TaskDiscarded";
}

namespace {

LogKind parse_log_kind(std::string_view s) {
  if (s == "TaskCreated") return LogKind::TaskCreated;
  if (s == "ComparisonSubmitted") return LogKind::ComparisonSubmitted;
  if (s == "TaskFinalized") return LogKind::TaskFinalized;
  if (s == "TaskDiscarded") return LogKind::TaskDiscarded;
  fail(ErrorCode::DataError, "unknown log entry kind \"" + std::string(s) + "\"");
}

TaskStatus parse_task_status(std::string_view s) {
  if (s == "open") return TaskStatus::Open;
  if (s == "finalized") return TaskStatus::Finalized;
  if (s == "discarded") return TaskStatus::Discarded;
  fail(ErrorCode::DataError, "unknown task status \"" + std::string(s) + "\"");
}

[[noreturn]] void io_fail(const std::string& what, const std::filesystem::path& path) {
  fail(ErrorCode::IoError, what + " " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("append to", path);
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

// ---------------------------------------------------------------------------
// EventLog

std::vector<LogEntry> EventLog::read_all(const std::filesystem::path& path) {
  std::vector<LogEntry> out;
  if (!std::filesystem::exists(path)) return out;
  const std::string content = read_file(path);
  const auto end = content.rfind('\n');
  if (end == std::string::npos) return out;

  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start <= end) {
    const auto nl = content.find('\n', start);
    const std::string line = content.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    LogEntry entry;
    try {
      const Json j = Json::parse(line);
      entry.seq = j.at("seq").get<std::uint64_t>();
      entry.kind = parse_log_kind(j.at("kind").get<std::string>());
      entry.payload = j.at("payload");
    } catch (const Json::exception& e) {
      fail(ErrorCode::DataError,
           path.string() + ":" + std::to_string(line_no) + ": corrupt log entry: " + e.what());
    }
    const std::uint64_t expected = out.empty() ? 1 : out.back().seq + 1;
    if (entry.seq != expected) {
      fail(ErrorCode::DataError, path.string() + ": sequence gap, expected " +
                                     std::to_string(expected) + " got " + std::to_string(entry.seq));
    }
    out.push_back(std::move(entry));
  }
  return out;
}

EventLog::EventLog(std::filesystem::path path, bool sync) : path_(std::move(path)), sync_(sync) {
  if (std::filesystem::exists(path_)) {
    // Drop a torn tail left by a crash mid-append.
    const std::string content = read_file(path_);
    const auto end = content.rfind('\n');
    const std::size_t keep = end == std::string::npos ? 0 : end + 1;
    if (keep != content.size()) std::filesystem::resize_file(path_, keep);
    const auto entries = read_all(path_);
    if (!entries.empty()) last_seq_ = entries.back().seq;
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) io_fail("cannot open event log", path_);
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t EventLog::append(LogKind kind, const Json& payload) {
  std::lock_guard lock(mutex_);
  const std::uint64_t seq = last_seq_ + 1;
  const Json entry{{"seq", seq}, {"kind", to_string(kind)}, {"payload", payload}};
  write_all(fd_, entry.dump() + '\n', path_);
  if (sync_ && ::fsync(fd_) != 0) io_fail("fsync", path_);
  last_seq_ = seq;
  return seq;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mutex_);
  return last_seq_;
}

// ---------------------------------------------------------------------------
// JSON forms

Json task_to_json(const AnnotationTask& task) {
  Json events = Json::array();
  for (const auto& e : task.events) events.push_back(event_to_json(e));
  Json refs = Json::array();
  for (const auto& r : task.references) refs.push_back(reference_to_json(r));
  Json j{{"task_id", task.task_id},
         {"query", query_to_json(task.query)},
         {"status", to_string(task.status)},
         {"events", std::move(events)},
         {"references", std::move(refs)},
         {"created_seq", task.created_seq},
         {"created_at", task.created_at},
         {"updated_at", task.updated_at}};
  if (task.record) j["record"] = record_to_json(*task.record);
  return j;
}

AnnotationTask task_from_json(const Json& j) {
  AnnotationTask task;
  try {
    task.task_id = j.at("task_id").get<std::string>();
    task.query = query_from_json(j.at("query"));
    task.status = parse_task_status(j.at("status").get<std::string>());
    for (const auto& e : j.at("events")) task.events.push_back(event_from_json(e));
    for (const auto& r : j.at("references")) task.references.push_back(reference_from_json(r));
    task.created_seq = j.at("created_seq").get<std::uint64_t>();
    task.created_at = j.at("created_at").get<std::string>();
    task.updated_at = j.at("updated_at").get<std::string>();
    if (j.contains("record")) task.record = record_from_json(j.at("record"));
  } catch (const Json::exception& e) {
    fail(ErrorCode::DataError, std::string("malformed task: ") + e.what());
  }
  return task;
}

Json summary_to_json(const PosteriorSummary& s) {
  return {{"task_id", s.task_id},
          {"posterior", distribution_to_json(s.posterior)},
          {"mode", s.mode},
          {"ci90", {s.ci90.lo, s.ci90.hi}},
          {"ci90_width", s.ci90.width()},
          {"remaining", s.remaining},
          {"status", to_string(s.status)}};
}

// ---------------------------------------------------------------------------
// AnnotationService

AnnotationService::AnnotationService(ServiceConfig config, std::vector<ReferenceItem> pool)
    : config_(std::move(config)),
      model_(config_.beta),
      prior_(AgeDistribution::uniform(config_.grid)),
      pool_(std::move(pool)) {
  config_.policy.validate();
  require(!config_.data_dir.empty(), "service data directory is required");
  require(config_.snapshot_every >= 1, "snapshot interval must be >= 1");
  for (const auto& r : pool_) {
    if (!config_.grid.contains(r.age)) {
      fail(ErrorCode::DataError, "reference " + r.id + " has age outside the grid");
    }
  }
  std::filesystem::create_directories(config_.data_dir);
  snapshot_path_ = config_.data_dir / "snapshot.json";
  log_ = std::make_unique<EventLog>(config_.data_dir / "events.jsonl", config_.fsync);
  restore();
}

AnnotationService::~AnnotationService() = default;

const std::filesystem::path& AnnotationService::log_path() const { return log_->path(); }

std::string AnnotationService::now() const {
  return config_.clock ? config_.clock() : utc_timestamp();
}

AnnotationService::TaskSlot& AnnotationService::slot(const std::string& task_id) const {
  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) fail(ErrorCode::UnknownTask, "no task with id " + task_id);
  return *it->second;
}

void AnnotationService::restore() {
  std::uint64_t snapshot_seq = 0;
  if (std::filesystem::exists(snapshot_path_)) {
    Json snap;
    try {
      snap = Json::parse(read_file(snapshot_path_));
      snapshot_seq = snap.at("last_seq").get<std::uint64_t>();
      next_task_number_ = snap.at("next_task_number").get<std::uint64_t>();
    } catch (const Json::exception& e) {
      fail(ErrorCode::DataError, std::string("corrupt snapshot: ") + e.what());
    }
    for (const auto& tj : snap.at("tasks")) {
      auto s = std::make_unique<TaskSlot>();
      s->task = task_from_json(tj);
      const std::string id = s->task.task_id;
      query_to_task_[s->task.query.id] = id;
      creation_order_.push_back(id);
      tasks_[id] = std::move(s);
    }
    last_snapshot_seq_ = snapshot_seq;
  }
  const auto entries = EventLog::read_all(log_->path());
  const std::uint64_t log_seq = entries.empty() ? 0 : entries.back().seq;
  if (log_seq < snapshot_seq) {
    fail(ErrorCode::DataError, "snapshot is ahead of the event log");
  }
  for (const auto& entry : entries) {
    if (entry.seq > snapshot_seq) apply(entry);
  }
}

void AnnotationService::apply(const LogEntry& entry) {
  const Json& p = entry.payload;
  try {
    switch (entry.kind) {
      case LogKind::TaskCreated: {
        auto s = std::make_unique<TaskSlot>();
        AnnotationTask& t = s->task;
        t.task_id = p.at("task_id").get<std::string>();
        t.query = query_from_json(p.at("query"));
        for (const auto& r : p.at("references")) t.references.push_back(reference_from_json(r));
        t.created_seq = entry.seq;
        t.created_at = p.at("created_at").get<std::string>();
        t.updated_at = t.created_at;
        if (tasks_.count(t.task_id) || query_to_task_.count(t.query.id)) {
          fail(ErrorCode::DataError, "log recreates task " + t.task_id);
        }
        const std::uint64_t number = std::stoull(t.task_id.substr(1));
        next_task_number_ = std::max(next_task_number_, number + 1);
        query_to_task_[t.query.id] = t.task_id;
        creation_order_.push_back(t.task_id);
        const std::string id = t.task_id;
        tasks_[id] = std::move(s);
        break;
      }
      case LogKind::ComparisonSubmitted: {
        AnnotationTask& t = slot(p.at("task_id").get<std::string>()).task;
        auto event = event_from_json(p.at("event"));
        if (t.status != TaskStatus::Open || t.remaining() == 0 ||
            t.references[t.events.size()].id != event.ref_id) {
          fail(ErrorCode::DataError, "log comparison does not match task " + t.task_id);
        }
        t.updated_at = event.timestamp;
        t.events.push_back(std::move(event));
        break;
      }
      case LogKind::TaskFinalized:
      case LogKind::TaskDiscarded: {
        AnnotationTask& t = slot(p.at("task_id").get<std::string>()).task;
        auto record = finalize_annotation(t.query.id, t.events, model_, prior_);
        if (record_to_json(record) != p.at("record")) {
          fail(ErrorCode::DataError, "logged record for " + t.task_id + " does not match recomputation");
        }
        t.status = record.status == AnnotationStatus::Labelled ? TaskStatus::Finalized
                                                               : TaskStatus::Discarded;
        t.updated_at = p.at("at").get<std::string>();
        t.record = std::move(record);
        break;
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::DataError, "malformed log entry " + std::to_string(entry.seq) + ": " + e.what());
  }
}

AnnotationTask AnnotationService::create_task(const QueryItem& query) {
  std::uint64_t seq;
  AnnotationTask out;
  {
    std::unique_lock lock(tasks_mutex_);
    require(!query.id.empty(), "query id is required");
    if (query_to_task_.count(query.id)) {
      fail(ErrorCode::DuplicateQuery, "query " + query.id + " already has task " +
                                          query_to_task_.at(query.id));
    }
    const int rough = rough_age_estimate(query, config_.grid);
    require(config_.grid.contains(rough), "rough age hint outside grid");
    std::vector<ReferenceItem> refs;
    try {
      refs = select_references(query, pool_, config_.policy, rough);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientPool) throw;
      fail(ErrorCode::InsufficientPool,
           std::string(e.what()) +
               "; hint: relax gender_match_required, then widen strata to <= / >= the rough age");
    }
    char id[32];
    std::snprintf(id, sizeof id, "t%06llu", static_cast<unsigned long long>(next_task_number_));
    Json refs_json = Json::array();
    for (const auto& r : refs) refs_json.push_back(reference_to_json(r));
    const Json payload{{"task_id", id},
                       {"query", query_to_json(query)},
                       {"references", std::move(refs_json)},
                       {"created_at", now()}};
    seq = log_->append(LogKind::TaskCreated, payload);
    apply({seq, LogKind::TaskCreated, payload});
    out = tasks_.at(id)->task;
  }
  maybe_snapshot(seq);
  return out;
}

AnnotationTask AnnotationService::get_task(const std::string& task_id) const {
  std::shared_lock lock(tasks_mutex_);
  auto& s = slot(task_id);
  std::lock_guard task_lock(s.mutex);
  return s.task;
}

std::vector<AnnotationTask> AnnotationService::list_tasks(std::optional<TaskStatus> status) const {
  std::shared_lock lock(tasks_mutex_);
  std::vector<AnnotationTask> out;
  for (const auto& id : creation_order_) {
    auto& s = *tasks_.at(id);
    std::lock_guard task_lock(s.mutex);
    if (!status || s.task.status == *status) out.push_back(s.task);
  }
  return out;
}

std::optional<ReferenceItem> AnnotationService::next_comparison(const std::string& task_id) const {
  std::shared_lock lock(tasks_mutex_);
  auto& s = slot(task_id);
  std::lock_guard task_lock(s.mutex);
  if (s.task.status != TaskStatus::Open) {
    fail(ErrorCode::TaskClosed, "task " + task_id + " is " + std::string(to_string(s.task.status)));
  }
  if (s.task.remaining() == 0) return std::nullopt;
  return s.task.references[s.task.events.size()];
}

PosteriorSummary AnnotationService::summarize(const AnnotationTask& task) const {
  auto posterior = posterior_from_events(model_, prior_, task.events);
  const int peak = mode(posterior);
  const auto ci = confidence_interval(posterior, kOutlierLevel);
  return {task.task_id, std::move(posterior), peak, ci, task.remaining(), task.status};
}

PosteriorSummary AnnotationService::summary(const std::string& task_id) const {
  std::shared_lock lock(tasks_mutex_);
  auto& s = slot(task_id);
  std::lock_guard task_lock(s.mutex);
  return summarize(s.task);
}

PosteriorSummary AnnotationService::submit_comparison(const std::string& task_id,
                                                      const std::string& ref_id, Outcome outcome,
                                                      const std::string& annotator_id) {
  std::uint64_t seq;
  PosteriorSummary out{task_id, prior_, 0, {}, 0, TaskStatus::Open};
  {
    std::shared_lock lock(tasks_mutex_);
    auto& s = slot(task_id);
    std::lock_guard task_lock(s.mutex);
    AnnotationTask& t = s.task;
    if (t.status != TaskStatus::Open) {
      fail(ErrorCode::TaskClosed, "task " + task_id + " is " + std::string(to_string(t.status)));
    }
    const auto it = std::find_if(t.references.begin(), t.references.end(),
                                 [&](const ReferenceItem& r) { return r.id == ref_id; });
    if (it == t.references.end()) {
      fail(ErrorCode::UnknownReference, "reference " + ref_id + " is not queued for " + task_id);
    }
    const auto index = static_cast<std::size_t>(it - t.references.begin());
    if (index != t.events.size()) {
      const std::string head =
          t.remaining() == 0 ? std::string("none (queue exhausted)") : t.references[t.events.size()].id;
      fail(ErrorCode::OutOfOrderReference,
           "reference " + ref_id + " is not at the queue head; expected " + head);
    }
    ComparisonEvent event;
    event.ref_id = it->id;
    event.ref_age = it->age;
    event.outcome = outcome;
    event.annotator_id = annotator_id;
    event.timestamp = now();
    // Reject evidence the posterior cannot absorb before it reaches the log.
    std::vector<ComparisonEvent> trial = t.events;
    trial.push_back(event);
    (void)posterior_from_events(model_, prior_, trial);

    const Json payload{{"task_id", task_id}, {"event", event_to_json(event)}};
    seq = log_->append(LogKind::ComparisonSubmitted, payload);
    apply({seq, LogKind::ComparisonSubmitted, payload});
    out = summarize(t);
  }
  maybe_snapshot(seq);
  return out;
}

AnnotationRecord AnnotationService::finalize_task(const std::string& task_id, bool force) {
  std::uint64_t seq;
  std::optional<AnnotationRecord> out;
  {
    std::shared_lock lock(tasks_mutex_);
    auto& s = slot(task_id);
    std::lock_guard task_lock(s.mutex);
    AnnotationTask& t = s.task;
    if (t.status != TaskStatus::Open) {
      fail(ErrorCode::TaskClosed, "task " + task_id + " is " + std::string(to_string(t.status)));
    }
    if (t.remaining() > 0 && !force) {
      fail(ErrorCode::QueueNotExhausted, std::to_string(t.remaining()) +
                                             " comparisons still pending for " + task_id +
                                             "; pass force to finalize early");
    }
    auto record = finalize_annotation(t.query.id, t.events, model_, prior_);
    const LogKind kind = record.status == AnnotationStatus::Labelled ? LogKind::TaskFinalized
                                                                     : LogKind::TaskDiscarded;
    const Json payload{{"task_id", task_id},
                       {"record", record_to_json(record)},
                       {"forced", force && t.remaining() > 0},
                       {"at", now()}};
    seq = log_->append(kind, payload);
    apply({seq, kind, payload});
    out = *t.record;
  }
  maybe_snapshot(seq);
  return std::move(*out);
}

std::vector<AnnotationRecord> AnnotationService::export_records(bool include_discarded) const {
  std::vector<AnnotationRecord> out;
  for (const auto& t : list_tasks()) {
    if (!t.record) continue;
    if (t.status == TaskStatus::Discarded && !include_discarded) continue;
    out.push_back(*t.record);
  }
  return out;
}

std::uint64_t AnnotationService::last_seq() const { return log_->last_seq(); }

std::size_t AnnotationService::task_count() const {
  std::shared_lock lock(tasks_mutex_);
  return tasks_.size();
}

Json AnnotationService::state_json() const {
  std::unique_lock lock(tasks_mutex_);
  Json tasks = Json::array();
  for (const auto& id : creation_order_) tasks.push_back(task_to_json(tasks_.at(id)->task));
  return {{"last_seq", log_->last_seq()},
          {"next_task_number", next_task_number_},
          {"tasks", std::move(tasks)}};
}

void AnnotationService::write_snapshot() {
  std::lock_guard guard(snapshot_mutex_);
  const Json state = state_json();
  const auto tmp = snapshot_path_.string() + ".tmp";
  write_file(tmp, state.dump());
  std::filesystem::rename(tmp, snapshot_path_);
  std::unique_lock lock(tasks_mutex_);
  last_snapshot_seq_ = std::max(last_snapshot_seq_, state.at("last_seq").get<std::uint64_t>());
}

void AnnotationService::maybe_snapshot(std::uint64_t seq) {
  {
    std::shared_lock lock(tasks_mutex_);
    if (seq < last_snapshot_seq_ + config_.snapshot_every) return;
  }
  write_snapshot();
}

}  // namespace agepost
