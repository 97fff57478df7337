#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "psij/job_model.hpp"

namespace psij {

class Job;

/// Invoked with the job and the newly recorded status on every genuine
/// state transition. Runs on the thread that recorded the transition and
/// must not block or call record_status on the same job.
using StatusCallback = std::function<void(Job&, const JobStatus&)>;

/// Stateful handle binding a JobSpec to an executor, a native scheduler ID
/// and a status history. Shared between the caller and the executor that
/// monitors it, so always held through std::shared_ptr.
class Job {
 public:
  explicit Job(JobSpec spec);
  // Handle without a spec, as produced by attach.
  Job(std::string id, std::optional<JobSpec> spec);

  Job(const Job&) = delete;
  Job& operator=(const Job&) = delete;

  static std::shared_ptr<Job> create(JobSpec spec) { return std::make_shared<Job>(std::move(spec)); }

  const std::string& id() const { return id_; }
  const std::optional<JobSpec>& spec() const { return spec_; }

  std::optional<std::string> native_id() const;
  /// Throws InvalidJobState when a different native id is already set.
  void set_native_id(const std::string& native_id);

  JobStatus status() const;
  JobState state() const { return status().state; }
  std::vector<JobStatus> history() const;

  /// Returns true when the status was a genuine transition, false for a
  /// duplicate report of the current state (dropped). Throws
  /// IllegalTransition and leaves the job untouched otherwise.
  bool record_status(JobStatus status);

  void add_status_callback(StatusCallback callback);

  /// Blocks until the job is terminal. Throws Timeout if `timeout` elapses
  /// first; the job keeps being monitored.
  JobStatus wait(std::optional<std::chrono::milliseconds> timeout = std::nullopt) const;

  /// Marks the job as handed to an executor. False if it already was.
  bool claim_submission() { return !submitted_.exchange(true); }

 private:
  const std::string id_;
  const std::optional<JobSpec> spec_;
  std::atomic<bool> submitted_{false};

  // dispatch_mutex_ serializes record+callback sequences so callbacks for
  // one job are delivered in transition order; mutex_ guards the fields.
  std::mutex dispatch_mutex_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::optional<std::string> native_id_;
  JobStatus current_;
  std::vector<JobStatus> history_;
  std::vector<StatusCallback> callbacks_;
};

/// Free-function form of Job::wait.
JobStatus wait(const Job& job, std::optional<std::chrono::milliseconds> timeout = std::nullopt);

/// Records every intermediate state needed to legally reach `target.state`
/// from the job's current state (e.g. QUEUED -> ACTIVE -> COMPLETED when a
/// poll missed the ACTIVE phase). Intermediate statuses carry
/// metadata["synthesized"]="true". No-op when the job is already in the
/// target state; returns false when the target is unreachable.
bool advance_job(Job& job, const JobStatus& target);

/// Random RFC 4122 version 4 identifier.
std::string make_job_id();

}  // namespace psij
