#include "psij/launcher.hpp"

#include <algorithm>

#include "psij/errors.hpp"
#include "psij/registry.hpp"

namespace psij {

namespace {

constexpr std::string_view kExecutable = "{EXECUTABLE}";
constexpr std::string_view kArgs = "{ARGS}";
constexpr std::string_view kNproc = "{NPROC}";
constexpr std::string_view kPpn = "{PPN}";

bool replace_all(std::string& s, std::string_view from, const std::string& to) {
  bool any = false;
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
    any = true;
  }
  return any;
}

}  // namespace

void validate_launcher(const LauncherDescriptor& launcher) {
  if (launcher.name.empty()) throw PluginError("launcher name is empty");
  const auto exe_count = std::count(launcher.tokens.begin(), launcher.tokens.end(), kExecutable);
  const auto args_count = std::count(launcher.tokens.begin(), launcher.tokens.end(), kArgs);
  if (exe_count != 1) throw PluginError("launcher " + launcher.name + ": {EXECUTABLE} must appear exactly once");
  if (args_count != 1) throw PluginError("launcher " + launcher.name + ": {ARGS} must appear exactly once");
  const auto exe_at = std::find(launcher.tokens.begin(), launcher.tokens.end(), kExecutable);
  const auto args_at = std::find(launcher.tokens.begin(), launcher.tokens.end(), kArgs);
  if (args_at < exe_at) throw PluginError("launcher " + launcher.name + ": {ARGS} must follow {EXECUTABLE}");
}

LaunchLine render_launch_line(const LauncherDescriptor& launcher, const JobSpec& spec) {
  validate_launcher(launcher);
  const auto nproc = spec.resources.total_processes();
  const auto ppn = spec.resources.resolved_processes_per_node();

  LaunchLine line;
  for (const auto& tok : launcher.tokens) {
    if (tok == kExecutable) {
      line.tokens.push_back(spec.executable);
      continue;
    }
    if (tok == kArgs) {
      line.tokens.insert(line.tokens.end(), spec.arguments.begin(), spec.arguments.end());
      continue;
    }
    std::string out = tok;
    if (out.find(kNproc) != std::string::npos) {
      if (!nproc) {
        throw UnresolvablePlaceholder("launcher " + launcher.name +
                                      ": {NPROC} needs process_count or node_count x processes_per_node");
      }
      replace_all(out, kNproc, std::to_string(*nproc));
    }
    if (out.find(kPpn) != std::string::npos) {
      if (!ppn) throw UnresolvablePlaceholder("launcher " + launcher.name + ": {PPN} cannot be resolved");
      replace_all(out, kPpn, std::to_string(*ppn));
    }
    line.tokens.push_back(std::move(out));
  }
  if (launcher.replicate) {
    if (!nproc) {
      throw UnresolvablePlaceholder("launcher " + launcher.name + " needs a process count to replicate");
    }
    line.copies = *nproc;
  }
  return line;
}

const std::vector<LauncherDescriptor>& builtin_launchers() {
  // Flag conventions follow each tool's public documentation.
  static const std::vector<LauncherDescriptor> launchers = {
      {"single", {"{EXECUTABLE}", "{ARGS}"}, false},
      {"multi", {"{EXECUTABLE}", "{ARGS}"}, true},
      {"mpirun", {"mpirun", "-np", "{NPROC}", "{EXECUTABLE}", "{ARGS}"}, false},
      {"srun", {"srun", "--ntasks={NPROC}", "{EXECUTABLE}", "{ARGS}"}, false},
      {"aprun", {"aprun", "-n", "{NPROC}", "-N", "{PPN}", "{EXECUTABLE}", "{ARGS}"}, false},
      {"jsrun", {"jsrun", "--np", "{NPROC}", "{EXECUTABLE}", "{ARGS}"}, false},
  };
  return launchers;
}

std::optional<LauncherDescriptor> find_builtin_launcher(std::string_view name) {
  for (const auto& l : builtin_launchers()) {
    if (l.name == name) return l;
  }
  return std::nullopt;
}

LauncherDescriptor resolve_launcher(const JobSpec& spec) {
  const std::string name = spec.launcher.value_or("single");
  if (auto l = PluginRegistry::global().find_launcher(name)) return *l;
  if (auto l = find_builtin_launcher(name)) return *l;
  throw UnknownLauncher("unknown launcher: " + name);
}

std::string shell_quote(std::string_view token) {
  const bool safe = !token.empty() && std::all_of(token.begin(), token.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '.' || c == '/' || c == ',' || c == ':' ||
           c == '+' || c == '@' || c == '%';
  });
  if (safe) return std::string(token);
  std::string out = "'";
  for (char c : token) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

}  // namespace psij
