#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "psij/executor.hpp"

namespace psij {

/// Runs jobs as child processes of this process. Each job is started under
/// a small supervisor (psij-shepherd) that leads its own process group and
/// records the payload's exit code in the work directory, which is what lets
/// other processes attach to and wait on local jobs.
///
/// A single watcher (the executor's poller) reaps children; there are no
/// per-job threads.
class LocalExecutor : public Executor {
 public:
  static constexpr std::chrono::milliseconds kCancelGrace{5000};

  explicit LocalExecutor(ExecutorConfig config, std::string name = "local");
  ~LocalExecutor() override;

  std::size_t tracked_jobs() const override;

 protected:
  std::vector<std::exception_ptr> submit_jobs(const std::vector<std::shared_ptr<Job>>& jobs) override;
  void cancel_job(Job& job) override;
  std::map<std::string, std::shared_ptr<Job>> attach_jobs(const std::vector<std::string>& native_ids) override;
  std::size_t poll_jobs() override;
  std::chrono::milliseconds next_poll_delay() const override;
  std::vector<Violation> check_spec(const JobSpec& spec) const override;

 private:
  struct Tracked {
    std::shared_ptr<Job> job;
    pid_t pid = 0;
    bool own_child = true;  // false for jobs attached from another process
    std::optional<std::chrono::steady_clock::time_point> kill_at;
    bool killed = false;
  };

  void spawn(const std::shared_ptr<Job>& job);
  JobStatus final_status(const Tracked& t, std::optional<int> wait_code) const;

  mutable std::mutex mutex_;
  std::map<pid_t, Tracked> tracked_;
  std::chrono::milliseconds delay_{1};
};

/// $PSIJ_SHEPHERD, else psij-shepherd next to the running executable, else
/// the build-tree location.
std::filesystem::path shepherd_binary();

}  // namespace psij
