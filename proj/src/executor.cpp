#include "psij/executor.hpp"

#include <unistd.h>

#include <cstdlib>
#include <fstream>

#include <spdlog/spdlog.h>

#include "logging.hpp"
#include "psij/errors.hpp"
#include "psij/job_model.hpp"

namespace psij {

namespace fs = std::filesystem;

namespace {

std::string sanitize(const std::string& native_id) {
  std::string out = native_id;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    if (!ok) c = '_';
  }
  return out;
}

std::optional<std::string> read_first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  if (!in || !std::getline(in, line) || line.empty()) return std::nullopt;
  return line;
}

void write_atomically(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << content;
  }
  fs::rename(tmp, p);
}

std::string describe(const std::exception_ptr& e, std::string* stderr_text) {
  try {
    std::rethrow_exception(e);
  } catch (const SubmitFailed& f) {
    *stderr_text = f.scheduler_stderr();
    return f.what();
  } catch (const std::exception& x) {
    return x.what();
  } catch (...) {
    return "unknown submission error";
  }
}

}  // namespace

std::vector<std::string> ExecutorConfig::validate() const {
  std::vector<std::string> v;
  if (poll_interval <= std::chrono::milliseconds::zero()) v.push_back("poll_interval must be positive");
  if (submit_window && *submit_window < std::chrono::milliseconds::zero()) {
    v.push_back("submit_window must not be negative");
  }
  if (failure_limit < 1) v.push_back("failure_limit must be at least 1");
  if (command_timeout <= std::chrono::milliseconds::zero()) v.push_back("command_timeout must be positive");
  if (submit_batch_limit < 1) v.push_back("submit_batch_limit must be at least 1");
  return v;
}

fs::path default_work_directory(const std::string& executor_name) {
  if (const char* w = std::getenv("PSIJ_WORK_DIR"); w && *w) return fs::path(w) / executor_name;
  if (const char* h = std::getenv("HOME"); h && *h) return fs::path(h) / ".psij-kit" / "work" / executor_name;
  return fs::temp_directory_path() / ("psij-kit-" + std::to_string(::getuid())) / executor_name;
}

Executor::Executor(std::string name, ExecutorConfig config) : name_(std::move(name)), config_(std::move(config)) {
  detail::init_logging();
  if (auto v = config_.validate(); !v.empty()) {
    throw InvalidSpec("invalid executor configuration for " + name_, std::move(v));
  }
  if (config_.work_directory.empty()) config_.work_directory = default_work_directory(name_);
  config_.work_directory = fs::absolute(config_.work_directory).lexically_normal();
  fs::create_directories(config_.work_directory / "native");
}

Executor::~Executor() {
  // Derived classes call shutdown() first; this catches direct misuse.
  shutdown();
  std::lock_guard lock(callback_slot_->mutex);
  callback_slot_->callback = nullptr;
}

void Executor::start() {
  if (started_) return;
  started_ = true;
  if (config_.background_polling) poller_ = std::thread([this] { poller_loop(); });
  if (config_.submit_window) window_thread_ = std::thread([this] { window_loop(); });
}

void Executor::shutdown() {
  {
    std::lock_guard lock(window_mutex_);
    window_stop_ = true;
  }
  window_cv_.notify_all();
  if (window_thread_.joinable()) window_thread_.join();
  {
    std::lock_guard lock(poller_mutex_);
    poller_stop_ = true;
  }
  poller_cv_.notify_all();
  if (poller_.joinable()) poller_.join();
}

void Executor::submit(const std::shared_ptr<Job>& job) { submit_async(job).get(); }

std::future<void> Executor::submit_async(const std::shared_ptr<Job>& job) {
  if (!job) throw InvalidJobState("null job");
  if (!job->spec()) throw InvalidJobState("job " + job->id() + " has no spec");
  if (job->state() != JobState::kNew) throw InvalidJobState("job " + job->id() + " is not NEW");
  require_valid(*job->spec());
  if (auto v = check_spec(*job->spec()); !v.empty()) {
    std::vector<std::string> text;
    for (const auto& x : v) text.push_back(x.to_string());
    throw InvalidSpec("job spec not supported by executor " + name_, std::move(text));
  }
  if (!job->claim_submission()) throw InvalidJobState("job " + job->id() + " was already submitted");
  watch(job);

  PendingSubmit p{job, {}};
  auto fut = p.done.get_future();
  if (!config_.submit_window || !window_thread_.joinable()) {
    std::vector<PendingSubmit> one;
    one.push_back(std::move(p));
    dispatch(std::move(one));
    return fut;
  }
  {
    std::lock_guard lock(window_mutex_);
    if (pending_.empty()) window_deadline_ = std::chrono::steady_clock::now() + *config_.submit_window;
    pending_.push_back(std::move(p));
  }
  window_cv_.notify_all();
  return fut;
}

void Executor::dispatch(std::vector<PendingSubmit> batch) {
  std::vector<std::shared_ptr<Job>> jobs;
  jobs.reserve(batch.size());
  for (const auto& p : batch) jobs.push_back(p.job);
  std::vector<std::exception_ptr> errors;
  try {
    errors = submit_jobs(jobs);
  } catch (...) {
    errors.assign(jobs.size(), std::current_exception());
  }
  errors.resize(jobs.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!errors[i]) {
      record_native_mapping(*jobs[i]);
      batch[i].done.set_value();
      continue;
    }
    std::string stderr_text;
    const std::string message = describe(errors[i], &stderr_text);
    auto status = make_status(JobState::kFailed, std::nullopt, message);
    if (!stderr_text.empty()) status.metadata["scheduler_stderr"] = stderr_text;
    try {
      advance_job(*jobs[i], status);
    } catch (const std::exception& e) {
      spdlog::warn("{}: could not record submission failure for {}: {}", name_, jobs[i]->id(), e.what());
    }
    batch[i].done.set_exception(errors[i]);
  }
}

void Executor::window_loop() {
  std::unique_lock lock(window_mutex_);
  for (;;) {
    if (pending_.empty()) {
      if (window_stop_) return;
      window_cv_.wait(lock, [&] { return window_stop_ || !pending_.empty(); });
      continue;
    }
    const bool full = pending_.size() >= config_.submit_batch_limit;
    if (!full && !window_stop_ && std::chrono::steady_clock::now() < *window_deadline_) {
      window_cv_.wait_until(lock, *window_deadline_, [&] {
        return window_stop_ || pending_.size() >= config_.submit_batch_limit;
      });
      continue;
    }
    std::vector<PendingSubmit> batch;
    if (pending_.size() > config_.submit_batch_limit) {
      auto cut = pending_.begin() + static_cast<std::ptrdiff_t>(config_.submit_batch_limit);
      batch.assign(std::make_move_iterator(pending_.begin()), std::make_move_iterator(cut));
      pending_.erase(pending_.begin(), cut);
    } else {
      batch.swap(pending_);
    }
    // Jobs left over from an overfull window start a fresh one.
    if (!pending_.empty()) window_deadline_ = std::chrono::steady_clock::now() + *config_.submit_window;
    lock.unlock();
    dispatch(std::move(batch));
    lock.lock();
  }
}

void Executor::cancel(Job& job) {
  const auto s = job.state();
  if (s == JobState::kNew) throw InvalidJobState("job " + job.id() + " has not been submitted");
  if (is_terminal(s)) throw InvalidJobState("job " + job.id() + " is already " + std::string(to_string(s)));
  cancel_job(job);
}

std::shared_ptr<Job> Executor::attach(const std::string& native_id) {
  auto found = attach_all({native_id});
  auto it = found.find(native_id);
  if (it == found.end()) throw UnknownNativeId("no " + name_ + " job with native id " + native_id);
  return it->second;
}

std::map<std::string, std::shared_ptr<Job>> Executor::attach_all(const std::vector<std::string>& native_ids) {
  auto found = attach_jobs(native_ids);
  for (auto& [nid, job] : found) watch(job);
  return found;
}

std::size_t Executor::poll_cycle() {
  std::lock_guard lock(poll_mutex_);
  try {
    return poll_jobs();
  } catch (const std::exception& e) {
    spdlog::warn("{}: monitoring cycle failed: {}", name_, e.what());
    return 0;
  }
}

void Executor::poller_loop() {
  auto next = std::chrono::steady_clock::now() + next_poll_delay();
  std::unique_lock lock(poller_mutex_);
  for (;;) {
    // Fixed rate: status traffic depends only on elapsed time.
    poller_cv_.wait_until(lock, next, [&] { return poller_stop_; });
    if (poller_stop_) return;
    lock.unlock();
    const auto cycle_start = std::chrono::steady_clock::now();
    poll_cycle();
    next = cycle_start + next_poll_delay();
    lock.lock();
  }
}

void Executor::set_status_callback(StatusCallback callback) {
  std::lock_guard lock(callback_slot_->mutex);
  callback_slot_->callback = std::move(callback);
}

void Executor::watch(const std::shared_ptr<Job>& job) {
  std::weak_ptr<CallbackSlot> weak = callback_slot_;
  job->add_status_callback([weak](Job& j, const JobStatus& s) {
    auto slot = weak.lock();
    if (!slot) return;
    StatusCallback cb;
    {
      std::lock_guard lock(slot->mutex);
      cb = slot->callback;
    }
    if (cb) cb(j, s);
  });
}

void Executor::record_native_mapping(const Job& job) {
  const auto nid = job.native_id();
  if (!nid) return;
  try {
    write_atomically(config_.work_directory / (job.id() + ".native"), *nid + "\n");
    write_atomically(config_.work_directory / "native" / sanitize(*nid), job.id() + "\n");
  } catch (const std::exception& e) {
    spdlog::warn("{}: could not record id mapping for {}: {}", name_, job.id(), e.what());
  }
}

std::optional<std::string> Executor::recorded_native_id(const std::string& job_id) const {
  if (job_id.empty() || job_id.find('/') != std::string::npos) return std::nullopt;
  return read_first_line(config_.work_directory / (job_id + ".native"));
}

std::optional<std::string> Executor::lookup_job_id(const std::string& native_id) const {
  return read_first_line(config_.work_directory / "native" / sanitize(native_id));
}

fs::path Executor::exit_code_file(const std::string& job_id) const {
  return config_.work_directory / (job_id + ".ec");
}

void Executor::mark_cancel_requested(const std::string& job_id) {
  std::ofstream(config_.work_directory / (job_id + ".cancel")) << "\n";
}

bool Executor::cancel_was_requested(const std::string& job_id) const {
  std::error_code ec;
  return fs::exists(config_.work_directory / (job_id + ".cancel"), ec);
}

std::vector<JobStatus> wait_all(const std::vector<std::shared_ptr<Job>>& jobs,
                                std::optional<std::chrono::milliseconds> timeout) {
  const auto deadline = timeout ? std::optional(std::chrono::steady_clock::now() + *timeout) : std::nullopt;
  std::vector<JobStatus> out;
  out.reserve(jobs.size());
  for (const auto& j : jobs) {
    std::optional<std::chrono::milliseconds> left;
    if (deadline) {
      left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - std::chrono::steady_clock::now());
      if (*left < std::chrono::milliseconds::zero()) left = std::chrono::milliseconds::zero();
    }
    out.push_back(j->wait(left));
  }
  return out;
}

}  // namespace psij
