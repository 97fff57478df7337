#pragma once

// The `psij` command-line front end. Every subcommand is a thin wrapper over
// the library; cli_main is exposed so tests can drive it in-process.
//
// Exit codes:
//   0  success (wait/run: the job COMPLETED)
//   1  the job reached FAILED or CANCELED
//   2  invalid job spec or usage
//   3  submission or scheduler failure
//   4  wait timed out
//   5  unknown job id

#include <ostream>
#include <string>
#include <vector>

namespace psij {

enum CliExit : int {
  kExitOk = 0,
  kExitJobNotCompleted = 1,
  kExitUsage = 2,
  kExitSchedulerFailure = 3,
  kExitTimeout = 4,
  kExitUnknownId = 5,
};

/// `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace psij
