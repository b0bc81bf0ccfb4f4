#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace stance {

enum class JobKind { kIngest, kExtract, kSample, kClassify, kEvaluate, kTrends, kSimilarity };
enum class JobStatus { kQueued, kRunning, kDone, kFailed };

std::string_view job_kind_name(JobKind k);
std::optional<JobKind> parse_job_kind(std::string_view s);
std::string_view job_status_name(JobStatus s);

struct JobInfo {
  std::string id;
  JobKind kind = JobKind::kClassify;
  JobStatus status = JobStatus::kQueued;
  std::size_t done = 0;
  std::size_t total = 0;
  std::filesystem::path log_path;
  std::string error;
  std::string result;  // JSON text produced by the job
};

class JobContext {
 public:
  void progress(std::size_t done, std::size_t total);
  void log(const std::string& line);
  bool cancelled() const { return cancelled_->load(); }

 private:
  friend class JobRunner;
  std::function<void(std::size_t, std::size_t)> on_progress_;
  std::filesystem::path log_path_;
  std::shared_ptr<std::atomic<bool>> cancelled_;
};

// Bounded worker pool. Status only moves queued -> running -> done|failed; a
// cancelled job fails with error "cancelled".
class JobRunner {
 public:
  using Work = std::function<std::string(JobContext&)>;

  JobRunner(std::size_t workers, std::filesystem::path log_dir);
  ~JobRunner();
  JobRunner(const JobRunner&) = delete;
  JobRunner& operator=(const JobRunner&) = delete;

  std::string submit(JobKind kind, Work work);
  std::optional<JobInfo> get(const std::string& id) const;
  std::vector<JobInfo> list() const;
  // False for unknown or finished jobs.
  bool cancel(const std::string& id);
  // Blocks until the job finishes; returns its final state.
  JobInfo wait(const std::string& id);

 private:
  struct Entry {
    JobInfo info;
    Work work;
    std::shared_ptr<std::atomic<bool>> cancelled = std::make_shared<std::atomic<bool>>(false);
  };
  void run();
  void transition(Entry& e, JobStatus to);

  std::filesystem::path log_dir_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable finished_cv_;
  std::map<std::string, Entry> jobs_;
  std::deque<std::string> queue_;
  std::size_t next_id_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace stance
