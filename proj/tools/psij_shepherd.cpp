// Supervisor for local jobs: runs N copies of a command, waits for them and
// records the worst exit code in an exit-code file. The file is written only
// when the command finished on its own; a SIGTERM (cancel) suppresses it.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace {

volatile sig_atomic_t g_terminated = 0;

void on_term(int) { g_terminated = 1; }

int decode(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return 255;
}

bool write_exit_code(const std::string& path, int code) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  FILE* f = std::fopen(tmp.c_str(), "w");
  if (!f) return false;
  std::fprintf(f, "%d\n", code);
  if (std::fclose(f) != 0) return false;
  return std::rename(tmp.c_str(), path.c_str()) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"psij-shepherd"};
  std::string ec_file;
  int copies = 1;
  std::vector<std::string> command;
  app.add_option("--ec", ec_file, "exit-code file")->required();
  app.add_option("--copies", copies, "number of copies")->check(CLI::Range(1, 100000));
  app.add_option("command", command, "command and arguments")->required();
  app.prefix_command(false);
  CLI11_PARSE(app, argc, argv);

  struct sigaction sa {};
  sa.sa_handler = on_term;
  sigemptyset(&sa.sa_mask);
  for (int sig : {SIGTERM, SIGINT, SIGHUP}) sigaction(sig, &sa, nullptr);

  std::vector<char*> args;
  for (auto& a : command) args.push_back(a.data());
  args.push_back(nullptr);

  // Termination signals stay blocked across fork so a cancel cannot land
  // between fork and exec while the child still runs our handler.
  sigset_t term;
  sigset_t old;
  sigemptyset(&term);
  for (int sig : {SIGTERM, SIGINT, SIGHUP}) sigaddset(&term, sig);
  sigprocmask(SIG_BLOCK, &term, &old);

  std::vector<pid_t> pids;
  for (int i = 0; i < copies; ++i) {
    const pid_t pid = ::fork();
    if (pid == 0) {
      for (int sig : {SIGTERM, SIGINT, SIGHUP}) signal(sig, SIG_DFL);
      sigprocmask(SIG_SETMASK, &old, nullptr);
      ::execvp(args[0], args.data());
      const int err = errno;
      std::fprintf(stderr, "psij-shepherd: cannot execute %s: %s\n", args[0], std::strerror(err));
      ::_exit(err == ENOENT ? 127 : 126);
    }
    if (pid < 0) {
      std::fprintf(stderr, "psij-shepherd: fork failed: %s\n", std::strerror(errno));
      break;
    }
    pids.push_back(pid);
  }
  sigprocmask(SIG_SETMASK, &old, nullptr);

  int worst = pids.empty() ? 126 : 0;
  if (static_cast<int>(pids.size()) < copies) worst = 126;
  for (pid_t pid : pids) {
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
      if (errno != EINTR) {
        status = 255 << 8;
        break;
      }
    }
    worst = std::max(worst, decode(status));
  }
  if (!g_terminated && !write_exit_code(ec_file, worst)) {
    std::fprintf(stderr, "psij-shepherd: cannot write %s\n", ec_file.c_str());
  }
  return worst > 255 ? 255 : worst;
}
