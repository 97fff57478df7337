#pragma once

// Executor and launcher plugin registry with manifest-based discovery.

#include <compare>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "psij/executor.hpp"
#include "psij/launcher.hpp"

namespace psij {

struct SemVer {
  int major = 0;
  int minor = 0;
  int patch = 0;
  std::string prerelease;

  /// MAJOR.MINOR.PATCH[-pre][+build]; build metadata is dropped. Throws
  /// PluginError.
  static SemVer parse(const std::string& text);
  std::string to_string() const;

  bool operator==(const SemVer&) const = default;
  std::strong_ordering operator<=>(const SemVer& o) const;
};

using ExecutorFactory = std::function<std::unique_ptr<Executor>(const ExecutorConfig&)>;

struct ExecutorDescriptor {
  std::string name;  // [a-z][a-z0-9-]*
  SemVer version;
  ExecutorFactory factory;
  std::string origin;  // "builtin" or the manifest path
};

/// C entry point exported by executor plugin libraries.
extern "C" {
using ExecutorEntryPoint = Executor* (*)(const ExecutorConfig*);
}

struct DiscoveryReport {
  std::vector<std::string> loaded;  // "name@version (origin)"
  std::vector<std::string> errors;  // "<manifest>: <reason>"
};

bool valid_plugin_name(const std::string& name);

class PluginRegistry {
 public:
  /// Throws PluginError (bad name) or DuplicatePlugin.
  void register_executor(ExecutorDescriptor descriptor);
  /// Throws PluginError (bad template) or DuplicatePlugin.
  void register_launcher(LauncherDescriptor descriptor, SemVer version);

  /// Fresh instance from the most recently registered descriptor with this
  /// name. Throws UnknownExecutor.
  std::unique_ptr<Executor> get_executor(const std::string& name, const ExecutorConfig& config = {}) const;
  std::optional<ExecutorDescriptor> find_executor(const std::string& name) const;
  std::optional<LauncherDescriptor> find_launcher(const std::string& name) const;

  std::vector<ExecutorDescriptor> executors() const;
  std::vector<std::pair<LauncherDescriptor, SemVer>> launchers() const;
  std::size_t size() const;

  /// Loads every *.json manifest in each directory, in order. A manifest
  /// whose (name, version) is already registered replaces the earlier
  /// entry, so later directories override earlier ones. Malformed manifests
  /// are skipped and reported.
  DiscoveryReport discover(const std::vector<std::filesystem::path>& directories);

  /// Default plugin directory followed by the PSIJ_PLUGIN_PATH entries.
  static std::vector<std::filesystem::path> plugin_path();

  /// Process-wide registry holding the builtin executors plus whatever
  /// discovery over plugin_path() found on first use.
  static PluginRegistry& global();

 private:
  struct LauncherEntry {
    LauncherDescriptor descriptor;
    SemVer version;
  };
  void load_manifest(const std::filesystem::path& manifest, DiscoveryReport& report);

  mutable std::mutex mutex_;
  std::vector<ExecutorDescriptor> executors_;  // registration order
  std::vector<LauncherEntry> launchers_;
};

/// local, slurm, pbs, lsf and mock.
void register_builtin_executors(PluginRegistry& registry);

/// Factory for a builtin executor name; nullopt when unknown.
std::optional<ExecutorFactory> builtin_executor_factory(const std::string& name);

}  // namespace psij
