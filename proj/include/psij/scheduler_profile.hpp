#pragma once

// Public command-line surface of a batch scheduler and the parsers for its
// output.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psij/job_model.hpp"

namespace psij {

/// Command templates use these placeholders:
///   {SCRIPTS}  whole token, one token per submit script
///   {IDS}      whole token, one token per native id
///   {ID_LIST}  inside a token, native ids joined with ','
///   {ID}       inside a token, a single native id
struct SchedulerProfile {
  std::string name;  // slurm | pbs | lsf
  std::vector<std::string> submit_command;
  bool submit_reads_stdin = false;  // script content piped to the submit command
  bool supports_bulk_submit = false;
  std::vector<std::string> status_command;
  std::vector<std::string> cancel_command;
  std::string directive_prefix;
  std::string native_id_pattern;  // exactly one capture group, matched per output line
  std::map<std::string, JobState> state_map;
  std::string status_skip_pattern;  // header lines in status output
  int status_id_column = 0;
  int status_state_column = 1;
  std::vector<int> status_ok_exit_codes{0};
  std::string cancel_unknown_pattern;  // recognises "job unknown/finished" on a failed cancel
  std::string job_id_variable;         // environment variable carrying the native id in-job
};

const SchedulerProfile& slurm_profile();
const SchedulerProfile& pbs_profile();
const SchedulerProfile& lsf_profile();
std::optional<SchedulerProfile> find_profile(std::string_view name);

/// Throws PluginError if the profile breaks its invariants.
void validate_profile(const SchedulerProfile& profile);

/// First native id in `submit_stdout`, whitespace-trimmed. Throws
/// UnparseableSubmitOutput when nothing matches.
std::string parse_native_id(std::string_view submit_stdout, const SchedulerProfile& profile);

/// Every native id in `submit_stdout`, in output order.
std::vector<std::string> parse_native_ids(std::string_view submit_stdout, const SchedulerProfile& profile);

struct StatusObservation {
  enum class Kind { kKnown, kUnmapped, kAbsent };
  Kind kind = Kind::kAbsent;
  JobState state = JobState::kQueued;  // meaningful for kKnown only
  std::string token;                   // raw native token when present
  std::map<std::string, std::string> metadata;
};

/// One observation per requested id; ids missing from the output are kAbsent.
std::map<std::string, StatusObservation> parse_status_output(std::string_view status_stdout,
                                                             const std::vector<std::string>& ids,
                                                             const SchedulerProfile& profile);

/// Expands a command template. `scripts` feeds {SCRIPTS}; `ids` feeds
/// {IDS}, {ID_LIST} and {ID} (first id).
std::vector<std::string> expand_command(const std::vector<std::string>& tmpl,
                                        const std::vector<std::string>& scripts,
                                        const std::vector<std::string>& ids);

}  // namespace psij
