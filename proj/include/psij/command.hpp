#pragma once

// Child-process execution with captured output, used for every scheduler
// command invocation.

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace psij {

struct CommandRequest {
  std::vector<std::string> argv;
  // Added to (or replacing entries of) the calling process environment.
  std::map<std::string, std::string> environment;
  std::optional<std::string> stdin_data;
  std::chrono::milliseconds timeout{60'000};
};

struct CommandResult {
  int exit_code = -1;  // 128+N when killed by signal N
  bool timed_out = false;
  bool spawn_failed = false;
  std::string out;
  std::string err;

  bool ok() const { return !timed_out && !spawn_failed && exit_code == 0; }
};

class CommandRunner {
 public:
  virtual ~CommandRunner() = default;
  virtual CommandResult run(const CommandRequest& request) = 0;
};

/// Runs commands as real child processes (posix_spawnp; PATH lookup).
class ProcessCommandRunner : public CommandRunner {
 public:
  CommandResult run(const CommandRequest& request) override;
};

/// "KEY=VALUE" strings: the current environment (when `inherit`) with
/// `overrides` applied on top.
std::vector<std::string> build_environment(const std::map<std::string, std::string>& overrides,
                                           bool inherit);

/// Decodes a waitpid status into an exit code (signals map to 128+N).
int decode_wait_status(int status);

}  // namespace psij
