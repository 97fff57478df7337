#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "psij/command.hpp"
#include "psij/executor.hpp"
#include "psij/scheduler_profile.hpp"

namespace psij {

/// Executor over a batch scheduler's public commands (submit, bulk status,
/// cancel), driven by a SchedulerProfile. Payload exit codes travel through
/// exit-code files written by the generated submit script.
class BatchExecutor : public Executor {
 public:
  static constexpr int kUnknownTokenLimit = 5;
  static constexpr int kAbsentGraceCycles = 2;

  BatchExecutor(std::string name, SchedulerProfile profile, ExecutorConfig config,
                std::shared_ptr<CommandRunner> runner = nullptr);
  ~BatchExecutor() override;

  const SchedulerProfile& profile() const { return profile_; }
  std::size_t tracked_jobs() const override;

  /// Runs one cancel command. Throws CancelRejected when the scheduler says
  /// the job is unknown or finished, SchedulerUnavailable on other failures.
  void request_cancel(const std::string& native_id);

  /// One status command covering all ids; empty input runs nothing. Throws
  /// SchedulerUnavailable.
  std::map<std::string, StatusObservation> bulk_status(const std::vector<std::string>& native_ids);

 protected:
  std::vector<std::exception_ptr> submit_jobs(const std::vector<std::shared_ptr<Job>>& jobs) override;
  void cancel_job(Job& job) override;
  std::map<std::string, std::shared_ptr<Job>> attach_jobs(const std::vector<std::string>& native_ids) override;
  std::size_t poll_jobs() override;

 private:
  // Streaks are touched only by the (serialized) poll cycle; the cancel flag
  // is also set from caller threads.
  struct Tracked {
    std::shared_ptr<Job> job;
    int unknown_streak = 0;
    int absent_streak = 0;
    std::atomic<bool> cancel_requested{false};

    Tracked() = default;
    explicit Tracked(std::shared_ptr<Job> j) : job(std::move(j)) {}
    Tracked(const Tracked& o)
        : job(o.job),
          unknown_streak(o.unknown_streak),
          absent_streak(o.absent_streak),
          cancel_requested(o.cancel_requested.load()) {}
    Tracked& operator=(const Tracked& o) {
      job = o.job;
      unknown_streak = o.unknown_streak;
      absent_streak = o.absent_streak;
      cancel_requested = o.cancel_requested.load();
      return *this;
    }
  };

  CommandResult run(const std::vector<std::string>& argv, const std::optional<std::string>& stdin_data = std::nullopt);
  std::filesystem::path write_script(const Job& job);
  void accept_submission(const std::shared_ptr<Job>& job, const std::string& native_id);
  // Terminal status implied by the exit-code file or a cancel request.
  std::optional<JobStatus> settle(const std::string& job_id, bool cancel_requested);
  // Applies one observation; true when the job became terminal.
  bool apply(Tracked& t, const std::string& native_id, const StatusObservation& obs);

  SchedulerProfile profile_;
  std::shared_ptr<CommandRunner> runner_;

  mutable std::mutex mutex_;
  std::map<std::string, Tracked> tracked_;  // by native id
  int failure_streak_ = 0;
};

/// Batch executor pointed at the mock-lrm tool. Options: "profile"
/// (slurm|pbs|lsf, default $MOCK_LRM_PROFILE or slurm), "state_dir"
/// (default $MOCK_LRM_DIR or <work_directory>/mock-lrm), and "clock",
/// "faults", "queue_latency_ms", "run_latency_ms", "age_out_ms", forwarded
/// to the tool's MOCK_LRM_* variables.
std::unique_ptr<Executor> make_mock_executor(const ExecutorConfig& config);

/// $MOCK_LRM_BIN, else mock-lrm next to the running executable, else the
/// build-tree location.
std::filesystem::path mock_lrm_binary();

}  // namespace psij
