#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "psij/job_model.hpp"
#include "psij/launcher.hpp"
#include "psij/scheduler_profile.hpp"

namespace psij {

/// Per-job inputs that are not part of the spec but appear in the script.
struct ScriptContext {
  std::string job_id;
  std::filesystem::path work_directory;
};

/// "<work_directory>/<job_id>.ec": a single decimal exit code and newline.
std::filesystem::path exit_code_path(const std::filesystem::path& work_directory, const std::string& job_id);

/// Reads an exit-code file; nullopt if missing or not a complete integer line.
std::optional<int> read_exit_code_file(const std::filesystem::path& path);

/// Scheduler directive lines for the spec (without the shebang).
/// Throws UnrenderableAttribute.
std::vector<std::string> render_directives(const JobSpec& spec, const SchedulerProfile& profile,
                                           const ScriptContext& context);

/// Full POSIX shell submit script. Deterministic in its inputs.
std::string render_submit_script(const JobSpec& spec, const SchedulerProfile& profile,
                                 const LauncherDescriptor& launcher, const ScriptContext& context);

/// Native wall-time renderings.
std::string format_hms(std::chrono::milliseconds d);      // HH:MM:SS, seconds rounded up
long long duration_minutes(std::chrono::milliseconds d);  // rounded up, at least 1

}  // namespace psij
