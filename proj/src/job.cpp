#include "psij/job.hpp"

#include <cstdio>
#include <random>

#include "psij/errors.hpp"

namespace psij {

std::string make_job_id() {
  thread_local std::mt19937_64 rng{std::random_device{}() ^
                                   (static_cast<std::uint64_t>(std::random_device{}()) << 32)};
  const std::uint64_t hi = (rng() & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;
  const std::uint64_t lo = (rng() & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%08llx-%04llx-%04llx-%04llx-%012llx",
                static_cast<unsigned long long>(hi >> 32),
                static_cast<unsigned long long>((hi >> 16) & 0xffff),
                static_cast<unsigned long long>(hi & 0xffff),
                static_cast<unsigned long long>(lo >> 48),
                static_cast<unsigned long long>(lo & 0xffffffffffffULL));
  return buf;
}

Job::Job(JobSpec spec) : Job(make_job_id(), std::move(spec)) {}

Job::Job(std::string id, std::optional<JobSpec> spec) : id_(std::move(id)), spec_(std::move(spec)) {
  current_ = make_status(JobState::kNew);
  history_.push_back(current_);
}

std::optional<std::string> Job::native_id() const {
  std::lock_guard lock(mutex_);
  return native_id_;
}

void Job::set_native_id(const std::string& native_id) {
  std::lock_guard lock(mutex_);
  if (native_id_ && *native_id_ != native_id) {
    throw InvalidJobState("job " + id_ + " already has native id " + *native_id_);
  }
  native_id_ = native_id;
}

JobStatus Job::status() const {
  std::lock_guard lock(mutex_);
  return current_;
}

std::vector<JobStatus> Job::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

bool Job::record_status(JobStatus status) {
  std::lock_guard dispatch(dispatch_mutex_);
  std::vector<StatusCallback> callbacks;
  {
    std::lock_guard lock(mutex_);
    if (status.state == current_.state) return false;
    if (!validate_transition(current_.state, status.state)) {
      throw IllegalTransition("job " + id_ + ": illegal transition " +
                              std::string(to_string(current_.state)) + " -> " +
                              std::string(to_string(status.state)));
    }
    if (status.exit_code && status.state != JobState::kCompleted && status.state != JobState::kFailed) {
      status.exit_code.reset();
    }
    if (status.timestamp == Timestamp{}) status.timestamp = now_ms();
    current_ = status;
    history_.push_back(status);
    callbacks = callbacks_;
  }
  for (auto& cb : callbacks) cb(*this, status);
  changed_.notify_all();
  return true;
}

void Job::add_status_callback(StatusCallback callback) {
  std::lock_guard lock(mutex_);
  callbacks_.push_back(std::move(callback));
}

JobStatus Job::wait(std::optional<std::chrono::milliseconds> timeout) const {
  std::unique_lock lock(mutex_);
  auto done = [&] { return is_terminal(current_.state); };
  if (!timeout) {
    changed_.wait(lock, done);
  } else if (!changed_.wait_for(lock, *timeout, done)) {
    throw Timeout("timed out waiting for job " + id_);
  }
  return current_;
}

JobStatus wait(const Job& job, std::optional<std::chrono::milliseconds> timeout) { return job.wait(timeout); }

bool advance_job(Job& job, const JobStatus& target) {
  const JobState from = job.state();
  if (from == target.state) return true;
  const auto path = transition_path(from, target.state);
  if (path.empty()) return false;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    JobStatus step = make_status(path[i]);
    step.timestamp = target.timestamp == Timestamp{} ? now_ms() : target.timestamp;
    step.metadata["synthesized"] = "true";
    job.record_status(step);
  }
  job.record_status(target);
  return true;
}

}  // namespace psij
