#include "psij/command.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <pthread.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

extern char** environ;

namespace psij {

namespace {

struct Pipe {
  int fds[2] = {-1, -1};
  Pipe() {
    if (pipe2(fds, O_CLOEXEC) != 0) fds[0] = fds[1] = -1;
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (fds[0] >= 0) ::close(fds[0]);
    fds[0] = -1;
  }
  void close_write() {
    if (fds[1] >= 0) ::close(fds[1]);
    fds[1] = -1;
  }
  bool ok() const { return fds[0] >= 0 && fds[1] >= 0; }
};

std::vector<char*> to_c_array(std::vector<std::string>& v) {
  std::vector<char*> out;
  out.reserve(v.size() + 1);
  for (auto& s : v) out.push_back(s.data());
  out.push_back(nullptr);
  return out;
}

}  // namespace

int decode_wait_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

std::vector<std::string> build_environment(const std::map<std::string, std::string>& overrides,
                                           bool inherit) {
  std::map<std::string, std::string> merged;
  if (inherit) {
    for (char** e = environ; e && *e; ++e) {
      std::string_view kv(*e);
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) continue;
      merged[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
    }
  }
  for (const auto& [k, v] : overrides) merged[k] = v;
  std::vector<std::string> out;
  out.reserve(merged.size());
  for (const auto& [k, v] : merged) out.push_back(k + "=" + v);
  return out;
}

CommandResult ProcessCommandRunner::run(const CommandRequest& request) {
  CommandResult result;
  if (request.argv.empty()) {
    result.spawn_failed = true;
    result.err = "empty command line";
    return result;
  }
  Pipe in, out, err;
  if (!in.ok() || !out.ok() || !err.ok()) {
    result.spawn_failed = true;
    result.err = std::string("pipe: ") + std::strerror(errno);
    return result;
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in.fds[0], 0);
  posix_spawn_file_actions_adddup2(&actions, out.fds[1], 1);
  posix_spawn_file_actions_adddup2(&actions, err.fds[1], 2);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t defaults;
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGPIPE);
  sigaddset(&defaults, SIGTERM);
  sigaddset(&defaults, SIGINT);
  posix_spawnattr_setsigdefault(&attr, &defaults);
  sigset_t empty;
  sigemptyset(&empty);
  posix_spawnattr_setsigmask(&attr, &empty);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGDEF | POSIX_SPAWN_SETSIGMASK);

  std::vector<std::string> argv = request.argv;
  std::vector<std::string> envv = build_environment(request.environment, true);
  auto c_argv = to_c_array(argv);
  auto c_env = to_c_array(envv);

  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, c_argv[0], &actions, &attr, c_argv.data(), c_env.data());
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    result.spawn_failed = true;
    result.exit_code = 127;
    result.err = request.argv[0] + ": " + std::strerror(rc);
    return result;
  }
  in.close_read();
  out.close_write();
  err.close_write();

  const std::string stdin_data = request.stdin_data.value_or("");
  std::size_t written = 0;
  // A child that exits without reading stdin must not SIGPIPE us: block it
  // on this thread while writing and swallow any pending instance after.
  sigset_t pipe_set, saved_mask;
  sigemptyset(&pipe_set);
  sigaddset(&pipe_set, SIGPIPE);
  bool pipe_blocked = false;
  if (stdin_data.empty()) {
    in.close_write();
  } else {
    fcntl(in.fds[1], F_SETFL, fcntl(in.fds[1], F_GETFL) | O_NONBLOCK);
    pipe_blocked = pthread_sigmask(SIG_BLOCK, &pipe_set, &saved_mask) == 0;
  }

  const auto deadline = std::chrono::steady_clock::now() + request.timeout;
  char buf[65536];
  while (out.fds[0] >= 0 || err.fds[0] >= 0) {
    pollfd fds[3];
    int n = 0;
    int out_idx = -1, err_idx = -1, in_idx = -1;
    if (out.fds[0] >= 0) { fds[n] = {out.fds[0], POLLIN, 0}; out_idx = n++; }
    if (err.fds[0] >= 0) { fds[n] = {err.fds[0], POLLIN, 0}; err_idx = n++; }
    if (in.fds[1] >= 0) { fds[n] = {in.fds[1], POLLOUT, 0}; in_idx = n++; }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      break;
    }
    const int ready = ::poll(fds, n, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    auto drain = [&](int idx, Pipe& p, std::string& sink) {
      if (idx < 0 || !(fds[idx].revents & (POLLIN | POLLHUP | POLLERR))) return;
      const ssize_t got = ::read(p.fds[0], buf, sizeof buf);
      if (got > 0) {
        sink.append(buf, static_cast<std::size_t>(got));
      } else if (got == 0 || (errno != EINTR && errno != EAGAIN)) {
        p.close_read();
      }
    };
    drain(out_idx, out, result.out);
    drain(err_idx, err, result.err);
    if (in_idx >= 0 && (fds[in_idx].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t put = ::write(in.fds[1], stdin_data.data() + written, stdin_data.size() - written);
      if (put > 0) written += static_cast<std::size_t>(put);
      if (put < 0 && errno != EAGAIN && errno != EINTR) written = stdin_data.size();
      if (written >= stdin_data.size()) in.close_write();
    }
  }
  in.close_write();
  if (pipe_blocked) {
    const timespec zero{0, 0};
    while (sigtimedwait(&pipe_set, nullptr, &zero) > 0) {
    }
    pthread_sigmask(SIG_SETMASK, &saved_mask, nullptr);
  }

  int status = 0;
  if (result.timed_out) {
    ::kill(pid, SIGKILL);
  }
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = result.timed_out ? 128 + SIGKILL : decode_wait_status(status);
  return result;
}

}  // namespace psij
