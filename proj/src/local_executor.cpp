#include "psij/local_executor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "psij/command.hpp"
#include "psij/errors.hpp"
#include "psij/launcher.hpp"
#include "psij/submit_script.hpp"
#include "tool_path.hpp"

#ifndef PSIJ_SHEPHERD_BUILD_PATH
#define PSIJ_SHEPHERD_BUILD_PATH "psij-shepherd"
#endif

namespace psij {

namespace fs = std::filesystem;

namespace {

constexpr std::chrono::milliseconds kMaxWatchDelay{50};

std::optional<pid_t> parse_pid(const std::string& s) {
  if (s.empty() || s.size() > 9 || s.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
  const long v = std::stol(s);
  if (v <= 1) return std::nullopt;
  return static_cast<pid_t>(v);
}

// A foreign shepherd is alive when the pid exists, is not a zombie, and its
// command line still names this job's exit-code file (guards against pid
// reuse).
bool shepherd_alive(pid_t pid, const fs::path& ec_file) {
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string line;
  if (!stat || !std::getline(stat, line)) return false;
  const auto paren = line.rfind(')');
  if (paren == std::string::npos || paren + 2 >= line.size()) return false;
  const char state = line[paren + 2];
  if (state == 'Z' || state == 'X') return false;
  std::ifstream cmd("/proc/" + std::to_string(pid) + "/cmdline", std::ios::binary);
  const std::string args((std::istreambuf_iterator<char>(cmd)), {});
  return args.find(std::string("--ec") + '\0' + ec_file.string() + '\0') != std::string::npos;
}

std::optional<std::string> env_value(const std::vector<std::string>& env, const std::string& key) {
  const std::string prefix = key + "=";
  for (const auto& e : env) {
    if (e.rfind(prefix, 0) == 0) return e.substr(prefix.size());
  }
  return std::nullopt;
}

bool is_executable_file(const fs::path& p) {
  std::error_code ec;
  return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

fs::path relative_to(const std::optional<std::string>& directory, const std::string& path) {
  fs::path p(path);
  if (p.is_relative() && directory) return fs::path(*directory) / p;
  return p;
}

void check_launchable(const JobSpec& spec, const std::string& exe, const std::vector<std::string>& env) {
  if (spec.directory) {
    std::error_code ec;
    if (!fs::is_directory(*spec.directory, ec)) throw SpawnFailed("directory does not exist: " + *spec.directory);
  }
  if (exe.find('/') != std::string::npos) {
    if (!is_executable_file(relative_to(spec.directory, exe))) {
      throw SpawnFailed("executable not found or not executable: " + exe);
    }
  } else {
    const std::string path = env_value(env, "PATH").value_or("/bin:/usr/bin");
    bool found = false;
    std::istringstream dirs(path);
    for (std::string d; std::getline(dirs, d, ':');) {
      if (is_executable_file(relative_to(spec.directory, (d.empty() ? "." : d) + "/" + exe))) {
        found = true;
        break;
      }
    }
    if (!found) throw SpawnFailed("executable not found on PATH: " + exe);
  }
  if (spec.stdin_path && ::access(relative_to(spec.directory, *spec.stdin_path).c_str(), R_OK) != 0) {
    throw SpawnFailed("stdin file not readable: " + *spec.stdin_path);
  }
}

struct SpawnResources {
  posix_spawn_file_actions_t actions;
  posix_spawnattr_t attr;
  SpawnResources() {
    posix_spawn_file_actions_init(&actions);
    posix_spawnattr_init(&attr);
  }
  ~SpawnResources() {
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
  }
};

}  // namespace

fs::path shepherd_binary() {
  return fs::absolute(detail::find_tool("PSIJ_SHEPHERD", "psij-shepherd", PSIJ_SHEPHERD_BUILD_PATH));
}

LocalExecutor::LocalExecutor(ExecutorConfig config, std::string name) : Executor(std::move(name), std::move(config)) {
  start();
}

LocalExecutor::~LocalExecutor() { shutdown(); }

std::size_t LocalExecutor::tracked_jobs() const {
  std::lock_guard lock(mutex_);
  return tracked_.size();
}

std::vector<Violation> LocalExecutor::check_spec(const JobSpec& spec) const {
  std::vector<Violation> v;
  if (spec.resources.node_count && *spec.resources.node_count > 1) {
    v.push_back({"resources.node_count", "the local executor runs on a single node"});
  }
  return v;
}

std::chrono::milliseconds LocalExecutor::next_poll_delay() const {
  std::lock_guard lock(mutex_);
  return delay_;
}

void LocalExecutor::spawn(const std::shared_ptr<Job>& job) {
  const JobSpec& spec = *job->spec();
  const LaunchLine line = render_launch_line(resolve_launcher(spec), spec);
  const auto policy = spec.environment_policy.value_or(EnvironmentPolicy::kInheritAll);
  const auto env = build_environment(spec.environment_overrides, policy == EnvironmentPolicy::kInheritAll);
  check_launchable(spec, line.tokens.front(), env);

  const fs::path shepherd = shepherd_binary();
  const std::string ec_file = exit_code_file(job->id()).string();
  std::vector<std::string> args = {shepherd.string(), "--ec", ec_file, "--copies", std::to_string(line.copies), "--"};
  args.insert(args.end(), line.tokens.begin(), line.tokens.end());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::vector<std::string> env_copy = env;
  std::vector<char*> envp;
  for (auto& e : env_copy) envp.push_back(e.data());
  envp.push_back(nullptr);

  const std::string out_path = spec.stdout_path.value_or((work_directory() / (job->id() + ".out")).string());
  const std::string err_path = spec.stderr_path.value_or((work_directory() / (job->id() + ".err")).string());
  const std::string in_path = spec.stdin_path.value_or("/dev/null");

  SpawnResources r;
  // chdir first so relative redirections resolve against the job directory,
  // as they do in the batch submit scripts.
  if (spec.directory) posix_spawn_file_actions_addchdir_np(&r.actions, spec.directory->c_str());
  posix_spawn_file_actions_addopen(&r.actions, 0, in_path.c_str(), O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&r.actions, 1, out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (spec.attributes.merge_output) {
    posix_spawn_file_actions_adddup2(&r.actions, 1, 2);
  } else {
    posix_spawn_file_actions_addopen(&r.actions, 2, err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  }
  sigset_t none;
  sigset_t all;
  sigemptyset(&none);
  sigfillset(&all);
  posix_spawnattr_setflags(&r.attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGMASK | POSIX_SPAWN_SETSIGDEF);
  posix_spawnattr_setpgroup(&r.attr, 0);
  posix_spawnattr_setsigmask(&r.attr, &none);
  posix_spawnattr_setsigdefault(&r.attr, &all);

  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, shepherd.c_str(), &r.actions, &r.attr, argv.data(), envp.data());
  if (rc != 0) {
    throw SpawnFailed("cannot start job (directory or redirection problem?): " + std::string(std::strerror(rc)));
  }
  job->set_native_id(std::to_string(pid));
  job->record_status(make_status(JobState::kQueued));
  job->record_status(make_status(JobState::kActive));
  std::lock_guard lock(mutex_);
  tracked_[pid] = Tracked{job, pid, true, std::nullopt, false};
  delay_ = std::chrono::milliseconds(1);
}

std::vector<std::exception_ptr> LocalExecutor::submit_jobs(const std::vector<std::shared_ptr<Job>>& jobs) {
  std::vector<std::exception_ptr> errors(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      spawn(jobs[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  return errors;
}

void LocalExecutor::cancel_job(Job& job) {
  const auto nid = job.native_id();
  const auto pid = nid ? parse_pid(*nid) : std::nullopt;
  if (!pid) throw InvalidJobState("job " + job.id() + " has no process id");
  mark_cancel_requested(job.id());
  std::lock_guard lock(mutex_);
  auto it = tracked_.find(*pid);
  if (it == tracked_.end()) {
    if (shepherd_alive(*pid, exit_code_file(job.id()))) ::kill(-*pid, SIGTERM);
    return;
  }
  ::kill(-*pid, SIGTERM);
  if (!it->second.kill_at) it->second.kill_at = std::chrono::steady_clock::now() + kCancelGrace;
  delay_ = std::chrono::milliseconds(1);
}

JobStatus LocalExecutor::final_status(const Tracked& t, std::optional<int> wait_code) const {
  const std::string& id = t.job->id();
  if (const auto code = read_exit_code_file(exit_code_file(id))) {
    return *code == 0 ? make_status(JobState::kCompleted, 0)
                      : make_status(JobState::kFailed, *code);
  }
  if (t.kill_at || cancel_was_requested(id)) return make_status(JobState::kCanceled);
  if (wait_code) {
    return make_status(JobState::kFailed, *wait_code, "job supervisor ended without recording an exit code");
  }
  return make_status(JobState::kFailed, std::nullopt, "job process ended without recording an exit code");
}

std::size_t LocalExecutor::poll_jobs() {
  std::vector<std::pair<Tracked, std::optional<int>>> finished;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    for (auto it = tracked_.begin(); it != tracked_.end();) {
      Tracked& t = it->second;
      bool done = false;
      std::optional<int> code;
      if (t.own_child) {
        int status = 0;
        const pid_t r = ::waitpid(t.pid, &status, WNOHANG);
        if (r == t.pid) {
          done = true;
          code = decode_wait_status(status);
        } else if (r < 0 && errno == ECHILD) {
          done = true;
        }
      } else {
        done = !shepherd_alive(t.pid, exit_code_file(t.job->id()));
      }
      if (done) {
        // Anything the payload left behind in its process group goes too.
        ::kill(-t.pid, SIGKILL);
        finished.emplace_back(t, code);
        it = tracked_.erase(it);
        continue;
      }
      if (t.kill_at && !t.killed && now >= *t.kill_at) {
        ::kill(-t.pid, SIGKILL);
        t.killed = true;
      }
      ++it;
    }
    delay_ = finished.empty() ? std::min(delay_ * 2, std::min(kMaxWatchDelay, config().poll_interval))
                              : std::chrono::milliseconds(1);
  }
  std::size_t updates = 0;
  for (const auto& [t, code] : finished) {
    const auto before = t.job->history().size();
    try {
      advance_job(*t.job, final_status(t, code));
    } catch (const IllegalTransition& e) {
      spdlog::warn("{}: job {}: {}", name(), t.job->id(), e.what());
    }
    updates += t.job->history().size() - before;
  }
  return updates;
}

std::map<std::string, std::shared_ptr<Job>> LocalExecutor::attach_jobs(const std::vector<std::string>& native_ids) {
  std::map<std::string, std::shared_ptr<Job>> out;
  for (const auto& nid : native_ids) {
    const auto pid = parse_pid(nid);
    if (!pid) continue;
    {
      std::lock_guard lock(mutex_);
      if (auto it = tracked_.find(*pid); it != tracked_.end()) {
        out[nid] = it->second.job;
        continue;
      }
    }
    const auto job_id = lookup_job_id(nid);
    if (!job_id) continue;
    auto job = std::make_shared<Job>(*job_id, std::nullopt);
    job->set_native_id(nid);
    job->claim_submission();
    Tracked t{job, *pid, true, std::nullopt, false};

    // A shepherd started by an earlier executor in this process is still
    // our child and must be reaped here.
    int status = 0;
    const pid_t r = ::waitpid(*pid, &status, WNOHANG);
    bool alive = false;
    std::optional<int> code;
    if (r == 0) {
      alive = true;
    } else if (r == *pid) {
      code = decode_wait_status(status);
    } else {
      t.own_child = false;
      alive = shepherd_alive(*pid, exit_code_file(*job_id));
    }
    if (alive) {
      advance_job(*job, make_status(JobState::kActive));
      std::lock_guard lock(mutex_);
      tracked_[*pid] = t;
      delay_ = std::chrono::milliseconds(1);
    } else {
      if (code) ::kill(-*pid, SIGKILL);
      advance_job(*job, final_status(t, code));
    }
    out[nid] = job;
  }
  return out;
}

}  // namespace psij
