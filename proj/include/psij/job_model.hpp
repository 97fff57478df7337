#pragma once

// Scheduler-independent job description and state machine.

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace psij {

using Clock = std::chrono::system_clock;
using Timestamp = std::chrono::time_point<Clock, std::chrono::milliseconds>;

Timestamp now_ms();
std::string format_timestamp(Timestamp t);  // RFC 3339, UTC, millisecond precision
std::optional<Timestamp> parse_timestamp(std::string_view text);

enum class JobState { kNew, kQueued, kActive, kCompleted, kFailed, kCanceled };

inline constexpr std::array<JobState, 6> kAllJobStates = {
    JobState::kNew,       JobState::kQueued, JobState::kActive,
    JobState::kCompleted, JobState::kFailed, JobState::kCanceled};

std::string_view to_string(JobState state);
std::optional<JobState> parse_job_state(std::string_view text);

constexpr bool is_terminal(JobState s) {
  return s == JobState::kCompleted || s == JobState::kFailed || s == JobState::kCanceled;
}

/// True iff from->to is an edge of the job state graph.
bool validate_transition(JobState from, JobState to);

/// Shortest legal walk from `from` to `to`, excluding `from` itself.
/// Empty when from == to or `to` is unreachable.
std::vector<JobState> transition_path(JobState from, JobState to);

struct JobStatus {
  JobState state = JobState::kNew;
  Timestamp timestamp{};
  std::optional<int> exit_code;
  std::optional<std::string> message;
  std::map<std::string, std::string> metadata;

  bool operator==(const JobStatus&) const = default;
};

JobStatus make_status(JobState state, std::optional<int> exit_code = std::nullopt,
                      std::optional<std::string> message = std::nullopt);

enum class EnvironmentPolicy { kInheritAll, kInheritNone };

std::string_view to_string(EnvironmentPolicy policy);
std::optional<EnvironmentPolicy> parse_environment_policy(std::string_view text);

struct ResourceSpec {
  std::optional<int> node_count;
  std::optional<int> processes_per_node;
  std::optional<int> process_count;
  std::optional<int> cpu_cores_per_process;
  std::optional<int> gpu_cores_per_process;
  // Absent means the executor default (exclusive for batch executors).
  std::optional<bool> exclusive_node_use;

  /// process_count, or node_count x processes_per_node.
  std::optional<int> total_processes() const;
  /// processes_per_node, or process_count / node_count when evenly divisible,
  /// or the whole process count when no node count is requested.
  std::optional<int> resolved_processes_per_node() const;

  bool operator==(const ResourceSpec&) const = default;
};

struct JobAttributes {
  std::optional<std::chrono::milliseconds> duration;
  std::optional<std::string> queue_name;
  std::optional<std::string> account;
  std::optional<std::string> reservation;
  std::map<std::string, std::string> custom;
  // Route stderr into stdout; allows stdout_path == stderr_path.
  bool merge_output = false;

  bool operator==(const JobAttributes&) const = default;
};

struct JobSpec {
  std::string executable;
  std::vector<std::string> arguments;
  std::optional<std::string> directory;
  // Absent means the executor default: inherit-all locally, inherit-none on batch.
  std::optional<EnvironmentPolicy> environment_policy;
  std::map<std::string, std::string> environment_overrides;
  std::optional<std::string> stdin_path;
  std::optional<std::string> stdout_path;
  std::optional<std::string> stderr_path;
  ResourceSpec resources;
  JobAttributes attributes;
  std::optional<std::string> name;
  std::optional<std::string> launcher;  // absent = "single"

  bool operator==(const JobSpec&) const = default;
};

struct Violation {
  std::string field;
  std::string message;

  std::string to_string() const { return field + ": " + message; }
  bool operator==(const Violation&) const = default;
};

inline constexpr auto kMaxDuration = std::chrono::milliseconds(365LL * 24 * 3600 * 1000);

/// Empty result means the spec is valid.
std::vector<Violation> validate_spec(const JobSpec& spec);

/// Throws InvalidSpec listing every violation.
void require_valid(const JobSpec& spec);

/// ISO-8601 durations restricted to the unambiguous subset PnW / PnDTnHnMn.fffS.
std::optional<std::chrono::milliseconds> parse_iso8601_duration(std::string_view text);
std::string format_iso8601_duration(std::chrono::milliseconds d);

}  // namespace psij
