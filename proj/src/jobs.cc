#include "stance/jobs.h"

#include <array>
#include <cstdio>

#include "stance/annotation.h"
#include "stance/errors.h"
#include "stance/fsutil.h"

namespace stance {

namespace {

constexpr std::array<std::pair<JobKind, std::string_view>, 7> kKindNames = {{
    {JobKind::kIngest, "ingest"},
    {JobKind::kExtract, "extract"},
    {JobKind::kSample, "sample"},
    {JobKind::kClassify, "classify"},
    {JobKind::kEvaluate, "evaluate"},
    {JobKind::kTrends, "trends"},
    {JobKind::kSimilarity, "similarity"},
}};

}  // namespace

std::string_view job_kind_name(JobKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "";
}

std::optional<JobKind> parse_job_kind(std::string_view s) {
  for (const auto& [kind, name] : kKindNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

std::string_view job_status_name(JobStatus s) {
  switch (s) {
    case JobStatus::kQueued: return "queued";
    case JobStatus::kRunning: return "running";
    case JobStatus::kDone: return "done";
    case JobStatus::kFailed: return "failed";
  }
  return "";
}

void JobContext::progress(std::size_t done, std::size_t total) {
  if (on_progress_) on_progress_(done, total);
}

void JobContext::log(const std::string& line) {
  if (!log_path_.empty()) durable_append(log_path_, utc_timestamp() + " " + line + "\n");
}

JobRunner::JobRunner(std::size_t workers, std::filesystem::path log_dir) : log_dir_(std::move(log_dir)) {
  if (!log_dir_.empty()) std::filesystem::create_directories(log_dir_);
  for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) workers_.emplace_back([this] { run(); });
}

JobRunner::~JobRunner() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    for (auto& [id, e] : jobs_) e.cancelled->store(true);
  }
  cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void JobRunner::transition(Entry& e, JobStatus to) {
  const JobStatus from = e.info.status;
  const bool ok = (from == JobStatus::kQueued && (to == JobStatus::kRunning || to == JobStatus::kFailed)) ||
                  (from == JobStatus::kRunning && (to == JobStatus::kDone || to == JobStatus::kFailed));
  if (!ok) {
    throw std::logic_error("illegal job transition " + std::string(job_status_name(from)) + " -> " +
                           std::string(job_status_name(to)));
  }
  e.info.status = to;
}

std::string JobRunner::submit(JobKind kind, Work work) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "job-%06zu", next_id_++);
    id = buf;
    Entry e;
    e.info.id = id;
    e.info.kind = kind;
    if (!log_dir_.empty()) e.info.log_path = log_dir_ / (id + ".log");
    e.work = std::move(work);
    jobs_.emplace(id, std::move(e));
    queue_.push_back(id);
  }
  cv_.notify_one();
  return id;
}

std::optional<JobInfo> JobRunner::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second.info;
}

std::vector<JobInfo> JobRunner::list() const {
  std::lock_guard lock(mu_);
  std::vector<JobInfo> out;
  for (const auto& [id, e] : jobs_) out.push_back(e.info);
  return out;
}

bool JobRunner::cancel(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return false;
  auto& e = it->second;
  if (e.info.status == JobStatus::kDone || e.info.status == JobStatus::kFailed) return false;
  e.cancelled->store(true);
  if (e.info.status == JobStatus::kQueued) {
    std::erase(queue_, id);
    transition(e, JobStatus::kFailed);
    e.info.error = "cancelled";
    finished_cv_.notify_all();
  }
  return true;
}

JobInfo JobRunner::wait(const std::string& id) {
  std::unique_lock lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw ValidationError("unknown job " + id);
  finished_cv_.wait(lock, [&] {
    return it->second.info.status == JobStatus::kDone || it->second.info.status == JobStatus::kFailed;
  });
  return it->second.info;
}

void JobRunner::run() {
  for (;;) {
    std::string id;
    Work work;
    JobContext ctx;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      id = queue_.front();
      queue_.pop_front();
      auto& e = jobs_.at(id);
      transition(e, JobStatus::kRunning);
      work = std::move(e.work);
      ctx.log_path_ = e.info.log_path;
      ctx.cancelled_ = e.cancelled;
      ctx.on_progress_ = [this, id](std::size_t done, std::size_t total) {
        std::lock_guard l(mu_);
        auto& info = jobs_.at(id).info;
        info.done = done;
        info.total = total;
      };
    }
    std::string result, error;
    bool ok = false;
    try {
      ctx.log("started");
      result = work(ctx);
      ok = !ctx.cancelled();
      if (!ok) error = "cancelled";
    } catch (const std::exception& ex) {
      error = ex.what();
    }
    ctx.log(ok ? "done" : "failed: " + error);
    {
      std::lock_guard lock(mu_);
      auto& e = jobs_.at(id);
      transition(e, ok ? JobStatus::kDone : JobStatus::kFailed);
      e.info.result = std::move(result);
      e.info.error = std::move(error);
    }
    finished_cv_.notify_all();
  }
}

}  // namespace stance
