#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "psij/job.hpp"

namespace psij {

struct ExecutorConfig {
  std::chrono::milliseconds poll_interval{5000};
  // Absent disables submission windowing.
  std::optional<std::chrono::milliseconds> submit_window;
  // Prepended verbatim to every scheduler command.
  std::vector<std::string> command_prefix;
  // Generated scripts, exit-code files and id mappings. Empty selects
  // default_work_directory(<executor name>).
  std::filesystem::path work_directory;
  // Consecutive failed status queries before all tracked jobs are failed.
  int failure_limit = 10;
  // Extra environment for scheduler commands.
  std::map<std::string, std::string> environment;
  // Executor-specific settings (e.g. the mock executor's "profile").
  std::map<std::string, std::string> options;
  bool background_polling = true;
  std::chrono::milliseconds command_timeout{60'000};
  std::size_t submit_batch_limit = 100;

  /// Human-readable problems; empty when the config is usable.
  std::vector<std::string> validate() const;
};

/// $PSIJ_WORK_DIR/<name>, else ~/.psij-kit/work/<name>, else a per-user
/// directory under the system temp directory.
std::filesystem::path default_work_directory(const std::string& executor_name);

/// Uniform asynchronous job API over one execution mechanism.
///
/// submit/cancel/attach may be called from any thread. Each instance owns a
/// background poller that drives status updates; with a submit window it
/// also owns a flusher that coalesces submissions into bulk scheduler calls.
class Executor {
 public:
  virtual ~Executor();

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  const std::string& name() const { return name_; }
  const ExecutorConfig& config() const { return config_; }
  const std::filesystem::path& work_directory() const { return config_.work_directory; }

  /// Blocks until the job has a native id and is at least QUEUED. Throws
  /// InvalidJobState (not NEW), InvalidSpec, or SubmitFailed (the job is
  /// then FAILED).
  void submit(const std::shared_ptr<Job>& job);

  /// Same contract, but the scheduler call may be deferred up to the submit
  /// window. State and spec errors are thrown synchronously; submission
  /// failures are delivered through the future.
  std::future<void> submit_async(const std::shared_ptr<Job>& job);

  /// Requests cancellation; the terminal state arrives through polling.
  /// Throws InvalidJobState when the job is NEW or already terminal.
  void cancel(Job& job);

  /// Throws UnknownNativeId.
  std::shared_ptr<Job> attach(const std::string& native_id);

  /// Attaches to many ids with one status query. Unknown ids are absent
  /// from the result.
  std::map<std::string, std::shared_ptr<Job>> attach_all(const std::vector<std::string>& native_ids);

  /// Runs one monitoring cycle now. Returns the number of status updates
  /// dispatched.
  std::size_t poll_cycle();

  /// Executor-wide callback, invoked for every transition of every job this
  /// instance submits or attaches.
  void set_status_callback(StatusCallback callback);

  virtual std::size_t tracked_jobs() const = 0;

  /// Number of bulk status queries issued so far.
  std::size_t status_queries() const { return status_queries_.load(); }

  /// Native id recorded for a client job id in the work directory, if any.
  std::optional<std::string> recorded_native_id(const std::string& job_id) const;

 protected:
  Executor(std::string name, ExecutorConfig config);

  /// Starts background threads; the last statement of a derived constructor.
  void start();
  /// Stops background threads, flushing pending submissions; the first
  /// statement of a derived destructor.
  void shutdown();

  /// Submit every job; on success the job must have a native id and be at
  /// least QUEUED. Returns one entry per job: null on success.
  virtual std::vector<std::exception_ptr> submit_jobs(const std::vector<std::shared_ptr<Job>>& jobs) = 0;
  virtual void cancel_job(Job& job) = 0;
  virtual std::map<std::string, std::shared_ptr<Job>> attach_jobs(const std::vector<std::string>& native_ids) = 0;
  virtual std::size_t poll_jobs() = 0;
  virtual std::chrono::milliseconds next_poll_delay() const { return config_.poll_interval; }
  /// Executor-specific spec restrictions, checked before submission.
  virtual std::vector<Violation> check_spec(const JobSpec&) const { return {}; }

  /// Routes the job's transitions to the executor-wide callback.
  void watch(const std::shared_ptr<Job>& job);
  void count_status_query() { ++status_queries_; }

  void record_native_mapping(const Job& job);
  std::optional<std::string> lookup_job_id(const std::string& native_id) const;
  std::filesystem::path exit_code_file(const std::string& job_id) const;
  /// Cancel markers persist a cancel request so that other processes can
  /// tell a canceled job from one that vanished.
  void mark_cancel_requested(const std::string& job_id);
  bool cancel_was_requested(const std::string& job_id) const;

 private:
  struct PendingSubmit {
    std::shared_ptr<Job> job;
    std::promise<void> done;
  };
  struct CallbackSlot {
    std::mutex mutex;
    StatusCallback callback;
  };

  void dispatch(std::vector<PendingSubmit> batch);
  void poller_loop();
  void window_loop();

  const std::string name_;
  ExecutorConfig config_;
  std::shared_ptr<CallbackSlot> callback_slot_ = std::make_shared<CallbackSlot>();
  std::atomic<std::size_t> status_queries_{0};

  std::mutex poll_mutex_;

  std::mutex poller_mutex_;
  std::condition_variable poller_cv_;
  bool poller_stop_ = false;
  std::thread poller_;

  std::mutex window_mutex_;
  std::condition_variable window_cv_;
  std::vector<PendingSubmit> pending_;
  std::optional<std::chrono::steady_clock::time_point> window_deadline_;
  bool window_stop_ = false;
  std::thread window_thread_;
  bool started_ = false;
};

/// Waits on many jobs; results in input order.
std::vector<JobStatus> wait_all(const std::vector<std::shared_ptr<Job>>& jobs,
                                std::optional<std::chrono::milliseconds> timeout = std::nullopt);

}  // namespace psij
