#include "psij/batch_executor.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>

#include <spdlog/spdlog.h>

#include "psij/errors.hpp"
#include "psij/launcher.hpp"
#include "psij/submit_script.hpp"
#include "tool_path.hpp"

#ifndef PSIJ_MOCK_LRM_BUILD_PATH
#define PSIJ_MOCK_LRM_BUILD_PATH "mock-lrm"
#endif

namespace psij {

namespace fs = std::filesystem;

namespace {

int rank(JobState s) {
  switch (s) {
    case JobState::kNew:
      return 0;
    case JobState::kQueued:
      return 1;
    case JobState::kActive:
      return 2;
    default:
      return 3;
  }
}

std::string first_line(const std::string& text) {
  auto s = text.substr(0, text.find('\n'));
  return s.size() > 300 ? s.substr(0, 300) + "..." : s;
}

std::string describe_failure(const std::string& what, const CommandResult& r) {
  if (r.spawn_failed) return what + " could not be started: " + first_line(r.err);
  if (r.timed_out) return what + " timed out";
  std::string msg = what + " exited with " + std::to_string(r.exit_code);
  if (!r.err.empty()) msg += ": " + first_line(r.err);
  return msg;
}

}  // namespace

BatchExecutor::BatchExecutor(std::string name, SchedulerProfile profile, ExecutorConfig config,
                             std::shared_ptr<CommandRunner> runner)
    : Executor(std::move(name), std::move(config)),
      profile_(std::move(profile)),
      runner_(runner ? std::move(runner) : std::make_shared<ProcessCommandRunner>()) {
  validate_profile(profile_);
  start();
}

BatchExecutor::~BatchExecutor() { shutdown(); }

std::size_t BatchExecutor::tracked_jobs() const {
  std::lock_guard lock(mutex_);
  return tracked_.size();
}

CommandResult BatchExecutor::run(const std::vector<std::string>& argv, const std::optional<std::string>& stdin_data) {
  CommandRequest req;
  req.argv = config().command_prefix;
  req.argv.insert(req.argv.end(), argv.begin(), argv.end());
  req.environment = config().environment;
  req.stdin_data = stdin_data;
  req.timeout = config().command_timeout;
  return runner_->run(req);
}

fs::path BatchExecutor::write_script(const Job& job) {
  const auto launcher = resolve_launcher(*job.spec());
  const std::string text = render_submit_script(*job.spec(), profile_, launcher, {job.id(), work_directory()});
  const fs::path path = work_directory() / (job.id() + ".sh");
  {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << text;
    if (!out) throw SubmitFailed("cannot write submit script " + path.string());
  }
  ::chmod(path.c_str(), 0700);
  return path;
}

void BatchExecutor::accept_submission(const std::shared_ptr<Job>& job, const std::string& native_id) {
  job->set_native_id(native_id);
  job->record_status(make_status(JobState::kQueued));
  // Tracked only after QUEUED is recorded so the poller never races ahead
  // of the submitting thread.
  std::lock_guard lock(mutex_);
  tracked_[native_id] = Tracked(job);
}

std::vector<std::exception_ptr> BatchExecutor::submit_jobs(const std::vector<std::shared_ptr<Job>>& jobs) {
  std::vector<std::exception_ptr> errors(jobs.size());
  std::vector<std::size_t> ready;
  std::vector<fs::path> scripts(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      scripts[i] = write_script(*jobs[i]);
      ready.push_back(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }

  if (profile_.supports_bulk_submit && !profile_.submit_reads_stdin && ready.size() > 1) {
    std::vector<std::string> paths;
    for (auto i : ready) paths.push_back(scripts[i].string());
    const auto r = run(expand_command(profile_.submit_command, paths, {}));
    std::exception_ptr failure;
    std::vector<std::string> ids;
    if (!r.ok()) {
      failure = std::make_exception_ptr(SubmitFailed(describe_failure("submit command", r), r.err));
    } else {
      ids = parse_native_ids(r.out, profile_);
      if (ids.size() != ready.size()) {
        failure = std::make_exception_ptr(UnparseableSubmitOutput(
            "bulk submit of " + std::to_string(ready.size()) + " scripts reported " + std::to_string(ids.size()) +
                " job ids: '" + first_line(r.out) + "'",
            r.err));
      }
    }
    if (!r.err.empty() && r.ok()) spdlog::warn("{}: submit stderr: {}", name(), first_line(r.err));
    for (std::size_t k = 0; k < ready.size(); ++k) {
      const auto i = ready[k];
      if (failure) {
        errors[i] = failure;
        continue;
      }
      try {
        accept_submission(jobs[i], ids[k]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    return errors;
  }

  for (auto i : ready) {
    try {
      std::optional<std::string> input;
      std::vector<std::string> argv;
      if (profile_.submit_reads_stdin) {
        std::ifstream in(scripts[i], std::ios::binary);
        input = std::string(std::istreambuf_iterator<char>(in), {});
        argv = expand_command(profile_.submit_command, {}, {});
      } else {
        argv = expand_command(profile_.submit_command, {scripts[i].string()}, {});
      }
      const auto r = run(argv, input);
      if (!r.ok()) throw SubmitFailed(describe_failure("submit command", r), r.err);
      const std::string nid = parse_native_id(r.out, profile_);
      // Exit 0 with stderr chatter is accepted.
      if (!r.err.empty()) spdlog::warn("{}: submit stderr: {}", name(), first_line(r.err));
      accept_submission(jobs[i], nid);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  return errors;
}

void BatchExecutor::request_cancel(const std::string& native_id) {
  const auto r = run(expand_command(profile_.cancel_command, {}, {native_id}));
  if (r.ok()) return;
  if (r.timed_out || r.spawn_failed) throw SchedulerUnavailable(describe_failure("cancel command", r));
  if (!profile_.cancel_unknown_pattern.empty() &&
      std::regex_search(r.out + "\n" + r.err, std::regex(profile_.cancel_unknown_pattern))) {
    throw CancelRejected("job " + native_id + ": " + first_line(r.err.empty() ? r.out : r.err));
  }
  throw SchedulerUnavailable(describe_failure("cancel command", r));
}

void BatchExecutor::cancel_job(Job& job) {
  const auto nid = job.native_id();
  if (!nid) throw InvalidJobState("job " + job.id() + " has no native id");
  mark_cancel_requested(job.id());
  {
    std::lock_guard lock(mutex_);
    if (auto it = tracked_.find(*nid); it != tracked_.end()) it->second.cancel_requested = true;
  }
  try {
    request_cancel(*nid);
  } catch (const CancelRejected& e) {
    spdlog::debug("{}: {}", name(), e.what());
  } catch (...) {
    std::error_code ec;
    fs::remove(work_directory() / (job.id() + ".cancel"), ec);
    std::lock_guard lock(mutex_);
    if (auto it = tracked_.find(*nid); it != tracked_.end()) it->second.cancel_requested = false;
    throw;
  }
}

std::map<std::string, StatusObservation> BatchExecutor::bulk_status(const std::vector<std::string>& native_ids) {
  if (native_ids.empty()) return {};
  const auto r = run(expand_command(profile_.status_command, {}, native_ids));
  count_status_query();
  const bool exit_ok = std::find(profile_.status_ok_exit_codes.begin(), profile_.status_ok_exit_codes.end(),
                                 r.exit_code) != profile_.status_ok_exit_codes.end();
  if (r.timed_out || r.spawn_failed || !exit_ok) throw SchedulerUnavailable(describe_failure("status command", r));
  return parse_status_output(r.out, native_ids, profile_);
}

std::optional<JobStatus> BatchExecutor::settle(const std::string& job_id, bool cancel_requested) {
  if (const auto code = read_exit_code_file(exit_code_file(job_id))) {
    return *code == 0 ? make_status(JobState::kCompleted, 0)
                      : make_status(JobState::kFailed, *code);
  }
  if (cancel_requested || cancel_was_requested(job_id)) return make_status(JobState::kCanceled);
  return std::nullopt;
}

bool BatchExecutor::apply(Tracked& t, const std::string& native_id, const StatusObservation& obs) {
  Job& job = *t.job;
  const JobState current = job.state();
  if (is_terminal(current)) return true;

  std::optional<JobStatus> next;
  switch (obs.kind) {
    case StatusObservation::Kind::kKnown: {
      t.unknown_streak = 0;
      const JobState s = obs.state;
      if (s == JobState::kCompleted || s == JobState::kFailed) {
        next = settle(job.id(), t.cancel_requested);
        if (!next) {
          // The exit-code file may lag the scheduler on shared filesystems.
          if (++t.absent_streak <= kAbsentGraceCycles) return false;
          next = make_status(s, std::nullopt, "scheduler reported " + obs.token + " but no exit-code file was written");
        }
      } else if (s == JobState::kCanceled) {
        next = make_status(JobState::kCanceled);
      } else {
        t.absent_streak = 0;
        if (rank(s) <= rank(current)) return false;  // stale or repeated report
        next = make_status(s);
      }
      for (const auto& [k, v] : obs.metadata) next->metadata.emplace(k, v);
      break;
    }
    case StatusObservation::Kind::kUnmapped:
      t.absent_streak = 0;
      ++t.unknown_streak;
      spdlog::warn("{}: job {} reported unrecognised state token '{}' ({} in a row)", name(), native_id, obs.token,
                   t.unknown_streak);
      if (t.unknown_streak < kUnknownTokenLimit) return false;
      next = make_status(JobState::kFailed, std::nullopt, "unrecognised scheduler state '" + obs.token + "' reported " +
                                                std::to_string(t.unknown_streak) + " times in a row");
      next->metadata["native_state"] = obs.token;
      break;
    case StatusObservation::Kind::kAbsent:
      t.unknown_streak = 0;
      next = settle(job.id(), t.cancel_requested);
      if (!next) {
        if (++t.absent_streak <= kAbsentGraceCycles) return false;
        next = make_status(JobState::kFailed, std::nullopt, "job disappeared");
      }
      break;
  }
  try {
    advance_job(job, *next);
  } catch (const IllegalTransition& e) {
    spdlog::warn("{}: job {}: {}", name(), native_id, e.what());
  }
  return is_terminal(job.state());
}

std::size_t BatchExecutor::poll_jobs() {
  std::vector<std::pair<std::string, Tracked*>> live;
  {
    std::lock_guard lock(mutex_);
    for (auto& [nid, t] : tracked_) live.emplace_back(nid, &t);
  }
  if (live.empty()) return 0;
  std::vector<std::string> ids;
  for (const auto& [nid, t] : live) ids.push_back(nid);

  std::size_t updates = 0;
  auto count_updates = [&](Job& job, auto&& fn) {
    const auto before = job.history().size();
    fn();
    updates += job.history().size() - before;
  };

  std::map<std::string, StatusObservation> observed;
  try {
    observed = bulk_status(ids);
    failure_streak_ = 0;
  } catch (const SchedulerUnavailable& e) {
    ++failure_streak_;
    spdlog::warn("{}: status query failed ({} in a row): {}", name(), failure_streak_, e.what());
    if (failure_streak_ < config().failure_limit) return 0;
    const std::string msg = "scheduler unavailable: " + std::to_string(failure_streak_) +
                            " consecutive status queries failed; last error: " + e.what();
    failure_streak_ = 0;
    for (const auto& [nid, t] : live) {
      count_updates(*t->job, [&] { advance_job(*t->job, make_status(JobState::kFailed, std::nullopt, msg)); });
    }
    std::lock_guard lock(mutex_);
    for (const auto& [nid, t] : live) tracked_.erase(nid);
    return updates;
  }

  std::vector<std::string> done;
  for (const auto& [nid, t] : live) {
    bool terminal = false;
    count_updates(*t->job, [&] { terminal = apply(*t, nid, observed[nid]); });
    if (terminal) done.push_back(nid);
  }
  std::lock_guard lock(mutex_);
  for (const auto& nid : done) tracked_.erase(nid);
  return updates;
}

std::map<std::string, std::shared_ptr<Job>> BatchExecutor::attach_jobs(const std::vector<std::string>& native_ids) {
  std::map<std::string, std::shared_ptr<Job>> out;
  std::vector<std::string> query;
  {
    std::lock_guard lock(mutex_);
    for (const auto& nid : native_ids) {
      if (nid.empty()) continue;
      if (auto it = tracked_.find(nid); it != tracked_.end()) {
        out[nid] = it->second.job;
      } else if (std::find(query.begin(), query.end(), nid) == query.end()) {
        query.push_back(nid);
      }
    }
  }
  const auto observed = bulk_status(query);
  for (const auto& nid : query) {
    const auto obs_it = observed.find(nid);
    const StatusObservation obs = obs_it == observed.end() ? StatusObservation{} : obs_it->second;
    const auto job_id = lookup_job_id(nid);
    std::optional<JobStatus> settled;
    if (obs.kind == StatusObservation::Kind::kAbsent) {
      if (!job_id) continue;
      settled = settle(*job_id, false);
      if (!settled) continue;
    }
    auto job = std::make_shared<Job>(job_id.value_or(make_job_id()), std::nullopt);
    job->set_native_id(nid);
    job->claim_submission();
    Tracked t(job);
    t.cancel_requested = job_id && cancel_was_requested(*job_id);
    if (settled) {
      advance_job(*job, *settled);
    } else {
      apply(t, nid, obs);
      if (job->state() == JobState::kNew) job->record_status(make_status(JobState::kQueued));
    }
    if (!is_terminal(job->state())) {
      std::lock_guard lock(mutex_);
      tracked_[nid] = t;
    }
    out[nid] = job;
  }
  return out;
}

fs::path mock_lrm_binary() { return detail::find_tool("MOCK_LRM_BIN", "mock-lrm", PSIJ_MOCK_LRM_BUILD_PATH); }

std::unique_ptr<Executor> make_mock_executor(const ExecutorConfig& in) {
  ExecutorConfig c = in;
  auto option = [&](const std::string& key) -> std::optional<std::string> {
    if (auto it = c.options.find(key); it != c.options.end()) return it->second;
    return std::nullopt;
  };
  auto env = [](const char* var) -> std::optional<std::string> {
    const char* v = std::getenv(var);
    return v && *v ? std::optional<std::string>(v) : std::nullopt;
  };
  const std::string profile_name = option("profile").value_or(env("MOCK_LRM_PROFILE").value_or("slurm"));
  auto profile = find_profile(profile_name);
  if (!profile) throw PluginError("mock executor: unknown profile '" + profile_name + "'");
  // The mock accepts several scripts per submit call; stdin-fed profiles
  // cannot.
  profile->supports_bulk_submit = !profile->submit_reads_stdin;

  if (c.work_directory.empty()) c.work_directory = default_work_directory("mock");
  c.work_directory = fs::absolute(c.work_directory);
  fs::path state_dir = option("state_dir").value_or(env("MOCK_LRM_DIR").value_or((c.work_directory / "mock-lrm").string()));
  state_dir = fs::absolute(state_dir);
  if (c.command_prefix.empty()) c.command_prefix = {mock_lrm_binary().string()};
  c.environment["MOCK_LRM_DIR"] = state_dir.string();
  c.environment["MOCK_LRM_PROFILE"] = profile_name;
  for (const auto& [key, var] : std::map<std::string, std::string>{{"clock", "MOCK_LRM_CLOCK"},
                                                                   {"faults", "MOCK_LRM_FAULTS"},
                                                                   {"queue_latency_ms", "MOCK_LRM_QUEUE_LATENCY_MS"},
                                                                   {"run_latency_ms", "MOCK_LRM_RUN_LATENCY_MS"},
                                                                   {"age_out_ms", "MOCK_LRM_AGE_OUT_MS"}}) {
    if (auto v = option(key)) c.environment[var] = *v;
  }
  return std::make_unique<BatchExecutor>("mock", *profile, std::move(c));
}

}  // namespace psij
