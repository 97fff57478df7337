#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace psij {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IllegalTransition : public Error {
 public:
  using Error::Error;
};

class InvalidJobState : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  InvalidSpec(std::string what, std::vector<std::string> violations)
      : Error(std::move(what)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Malformed serialized input (job file, config file, manifest).
class ParseError : public Error {
 public:
  using Error::Error;
};

class DuplicatePlugin : public Error {
 public:
  using Error::Error;
};

class PluginError : public Error {
 public:
  using Error::Error;
};

class UnknownExecutor : public Error {
 public:
  using Error::Error;
};

class UnknownLauncher : public Error {
 public:
  using Error::Error;
};

class UnresolvablePlaceholder : public Error {
 public:
  using Error::Error;
};

class UnrenderableAttribute : public Error {
 public:
  using Error::Error;
};

class SubmitFailed : public Error {
 public:
  SubmitFailed(std::string message, std::string scheduler_stderr = {})
      : Error(std::move(message)), scheduler_stderr_(std::move(scheduler_stderr)) {}
  const std::string& scheduler_stderr() const { return scheduler_stderr_; }

 private:
  std::string scheduler_stderr_;
};

class UnparseableSubmitOutput : public SubmitFailed {
 public:
  using SubmitFailed::SubmitFailed;
};

class SpawnFailed : public SubmitFailed {
 public:
  using SubmitFailed::SubmitFailed;
};

class SchedulerUnavailable : public Error {
 public:
  using Error::Error;
};

/// The scheduler refused a cancel because the job is unknown or finished.
/// Batch executors absorb it; the next poll settles the state.
class CancelRejected : public Error {
 public:
  using Error::Error;
};

class UnknownNativeId : public Error {
 public:
  using Error::Error;
};

class Timeout : public Error {
 public:
  using Error::Error;
};

}  // namespace psij
