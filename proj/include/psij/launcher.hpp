#pragma once

// In-allocation launch wrappers (direct exec, mpirun, srun, ...).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psij/job_model.hpp"

namespace psij {

/// A launcher is a token template. Recognised placeholders:
///   {EXECUTABLE}  whole token, exactly once
///   {ARGS}        whole token, exactly once, after {EXECUTABLE}; expands to 0..n tokens
///   {NPROC} {PPN} substituted anywhere inside a token
/// `replicate` launchers run NPROC copies of the rendered line and report
/// the worst exit code.
struct LauncherDescriptor {
  std::string name;
  std::vector<std::string> tokens;
  bool replicate = false;
};

struct LaunchLine {
  std::vector<std::string> tokens;
  int copies = 1;

  bool operator==(const LaunchLine&) const = default;
};

/// Throws PluginError when the template breaks the placeholder rules.
void validate_launcher(const LauncherDescriptor& launcher);

/// Throws UnresolvablePlaceholder when the template needs a process
/// geometry the spec does not provide.
LaunchLine render_launch_line(const LauncherDescriptor& launcher, const JobSpec& spec);

const std::vector<LauncherDescriptor>& builtin_launchers();
std::optional<LauncherDescriptor> find_builtin_launcher(std::string_view name);

/// Resolves spec.launcher (default "single") against the builtins and the
/// global plugin registry. Throws UnknownLauncher.
LauncherDescriptor resolve_launcher(const JobSpec& spec);

/// POSIX shell single-quoting; tokens made only of safe characters are
/// returned unchanged.
std::string shell_quote(std::string_view token);

}  // namespace psij
