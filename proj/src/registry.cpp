#include "psij/registry.hpp"

#include <dlfcn.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "psij/batch_executor.hpp"
#include "psij/errors.hpp"
#include "psij/local_executor.hpp"

namespace psij {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int parse_component(const std::string& s, const std::string& whole) {
  if (s.empty() || (s.size() > 1 && s[0] == '0') || s.find_first_not_of("0123456789") != std::string::npos ||
      s.size() > 9) {
    throw PluginError("invalid semantic version: '" + whole + "'");
  }
  return std::stoi(s);
}

const SemVer kBuiltinVersion{0, 1, 0, ""};

}  // namespace

SemVer SemVer::parse(const std::string& text) {
  static const std::regex re(R"(^([0-9]+)\.([0-9]+)\.([0-9]+)(?:-([0-9A-Za-z.-]+))?(?:\+[0-9A-Za-z.-]+)?$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw PluginError("invalid semantic version: '" + text + "'");
  SemVer v;
  v.major = parse_component(m[1].str(), text);
  v.minor = parse_component(m[2].str(), text);
  v.patch = parse_component(m[3].str(), text);
  v.prerelease = m[4].str();
  return v;
}

std::string SemVer::to_string() const {
  std::string s = std::to_string(major) + "." + std::to_string(minor) + "." + std::to_string(patch);
  if (!prerelease.empty()) s += "-" + prerelease;
  return s;
}

std::strong_ordering SemVer::operator<=>(const SemVer& o) const {
  if (auto c = std::tie(major, minor, patch) <=> std::tie(o.major, o.minor, o.patch); c != 0) return c;
  // A release sorts after its prereleases.
  if (prerelease.empty() != o.prerelease.empty()) {
    return prerelease.empty() ? std::strong_ordering::greater : std::strong_ordering::less;
  }
  return prerelease.compare(o.prerelease) <=> 0;
}

bool valid_plugin_name(const std::string& name) {
  static const std::regex re("^[a-z][a-z0-9-]*$");
  return std::regex_match(name, re);
}

void PluginRegistry::register_executor(ExecutorDescriptor descriptor) {
  if (!valid_plugin_name(descriptor.name)) throw PluginError("invalid executor name: '" + descriptor.name + "'");
  if (!descriptor.factory) throw PluginError("executor " + descriptor.name + " has no factory");
  if (descriptor.origin.empty()) descriptor.origin = "api";
  std::lock_guard lock(mutex_);
  for (const auto& d : executors_) {
    if (d.name == descriptor.name && d.version == descriptor.version) {
      throw DuplicatePlugin("executor " + d.name + "@" + d.version.to_string() + " is already registered");
    }
  }
  executors_.push_back(std::move(descriptor));
}

void PluginRegistry::register_launcher(LauncherDescriptor descriptor, SemVer version) {
  if (!valid_plugin_name(descriptor.name)) throw PluginError("invalid launcher name: '" + descriptor.name + "'");
  validate_launcher(descriptor);
  std::lock_guard lock(mutex_);
  for (const auto& e : launchers_) {
    if (e.descriptor.name == descriptor.name && e.version == version) {
      throw DuplicatePlugin("launcher " + descriptor.name + "@" + version.to_string() + " is already registered");
    }
  }
  launchers_.push_back({std::move(descriptor), std::move(version)});
}

std::optional<ExecutorDescriptor> PluginRegistry::find_executor(const std::string& name) const {
  std::lock_guard lock(mutex_);
  for (auto it = executors_.rbegin(); it != executors_.rend(); ++it) {
    if (it->name == name) return *it;
  }
  return std::nullopt;
}

std::unique_ptr<Executor> PluginRegistry::get_executor(const std::string& name, const ExecutorConfig& config) const {
  const auto d = find_executor(name);
  if (!d) throw UnknownExecutor("no executor named '" + name + "'");
  auto ex = d->factory(config);
  if (!ex) throw PluginError("executor factory for " + name + " returned nothing");
  return ex;
}

std::optional<LauncherDescriptor> PluginRegistry::find_launcher(const std::string& name) const {
  std::lock_guard lock(mutex_);
  for (auto it = launchers_.rbegin(); it != launchers_.rend(); ++it) {
    if (it->descriptor.name == name) return it->descriptor;
  }
  return std::nullopt;
}

std::vector<ExecutorDescriptor> PluginRegistry::executors() const {
  std::lock_guard lock(mutex_);
  return executors_;
}

std::vector<std::pair<LauncherDescriptor, SemVer>> PluginRegistry::launchers() const {
  std::lock_guard lock(mutex_);
  std::vector<std::pair<LauncherDescriptor, SemVer>> out;
  for (const auto& e : launchers_) out.emplace_back(e.descriptor, e.version);
  return out;
}

std::size_t PluginRegistry::size() const {
  std::lock_guard lock(mutex_);
  return executors_.size() + launchers_.size();
}

void PluginRegistry::load_manifest(const fs::path& manifest, DiscoveryReport& report) {
  json doc;
  try {
    std::ifstream in(manifest);
    doc = json::parse(in);
  } catch (const std::exception& e) {
    throw PluginError(std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw PluginError("manifest must be a JSON object");
  auto str = [&](const char* key) -> std::string {
    if (!doc.contains(key) || !doc[key].is_string()) throw PluginError(std::string("missing string field '") + key + "'");
    return doc[key].get<std::string>();
  };
  const std::string name = str("name");
  if (!valid_plugin_name(name)) throw PluginError("invalid plugin name '" + name + "'");
  const SemVer version = SemVer::parse(str("version"));
  const std::string kind = doc.value("kind", std::string("executor"));

  if (kind == "launcher") {
    if (!doc.contains("template") || !doc["template"].is_array()) {
      throw PluginError("launcher manifest needs a 'template' token array");
    }
    LauncherDescriptor d;
    d.name = name;
    for (const auto& t : doc["template"]) {
      if (!t.is_string()) throw PluginError("launcher template tokens must be strings");
      d.tokens.push_back(t.get<std::string>());
    }
    d.replicate = doc.value("replicate", false);
    validate_launcher(d);
    std::lock_guard lock(mutex_);
    std::erase_if(launchers_, [&](const LauncherEntry& e) { return e.descriptor.name == name && e.version == version; });
    launchers_.push_back({std::move(d), version});
    report.loaded.push_back("launcher " + name + "@" + version.to_string() + " (" + manifest.string() + ")");
    return;
  }
  if (kind != "executor") throw PluginError("unknown plugin kind '" + kind + "'");

  const std::string entry = str("entry_point");
  ExecutorFactory factory;
  if (entry.rfind("builtin:", 0) == 0) {
    auto f = builtin_executor_factory(entry.substr(8));
    if (!f) throw PluginError("no builtin executor '" + entry.substr(8) + "'");
    factory = *f;
  } else {
    const auto hash = entry.find('#');
    if (hash == std::string::npos || hash == 0 || hash + 1 == entry.size()) {
      throw PluginError("entry_point must be 'builtin:<name>' or '<library>#<symbol>'");
    }
    fs::path lib = entry.substr(0, hash);
    if (lib.is_relative()) lib = manifest.parent_path() / lib;
    const std::string symbol = entry.substr(hash + 1);
    // Plugin libraries stay loaded for the life of the process.
    void* handle = ::dlopen(lib.c_str(), RTLD_NOW | RTLD_LOCAL);
    if (!handle) throw PluginError(std::string("cannot load ") + lib.string() + ": " + ::dlerror());
    auto* fn = reinterpret_cast<ExecutorEntryPoint>(::dlsym(handle, symbol.c_str()));
    if (!fn) throw PluginError("symbol " + symbol + " not found in " + lib.string());
    factory = [fn, name](const ExecutorConfig& config) {
      std::unique_ptr<Executor> ex(fn(&config));
      if (!ex) throw PluginError("plugin entry point for " + name + " returned null");
      return ex;
    };
  }
  ExecutorDescriptor d{name, version, std::move(factory), manifest.string()};
  std::lock_guard lock(mutex_);
  std::erase_if(executors_, [&](const ExecutorDescriptor& e) { return e.name == name && e.version == version; });
  executors_.push_back(std::move(d));
  report.loaded.push_back(name + "@" + version.to_string() + " (" + manifest.string() + ")");
}

DiscoveryReport PluginRegistry::discover(const std::vector<fs::path>& directories) {
  DiscoveryReport report;
  for (const auto& dir : directories) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) continue;
    std::vector<fs::path> manifests;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
      if (e.path().extension() == ".json" && e.is_regular_file(ec)) manifests.push_back(e.path());
    }
    std::sort(manifests.begin(), manifests.end());
    for (const auto& m : manifests) {
      try {
        load_manifest(m, report);
      } catch (const std::exception& e) {
        report.errors.push_back(m.string() + ": " + e.what());
      }
    }
  }
  return report;
}

std::vector<fs::path> PluginRegistry::plugin_path() {
  std::vector<fs::path> out;
  if (const char* x = std::getenv("XDG_DATA_HOME"); x && *x) {
    out.push_back(fs::path(x) / "psij-kit" / "plugins");
  } else if (const char* h = std::getenv("HOME"); h && *h) {
    out.push_back(fs::path(h) / ".local" / "share" / "psij-kit" / "plugins");
  }
  if (const char* p = std::getenv("PSIJ_PLUGIN_PATH"); p && *p) {
    std::string s = p;
    std::size_t start = 0;
    for (;;) {
      const auto colon = s.find(':', start);
      const auto part = s.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
      if (!part.empty()) out.emplace_back(part);
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
  }
  return out;
}

PluginRegistry& PluginRegistry::global() {
  static PluginRegistry* registry = [] {
    auto* r = new PluginRegistry();
    register_builtin_executors(*r);
    const auto report = r->discover(plugin_path());
    for (const auto& e : report.errors) spdlog::warn("plugin discovery: {}", e);
    return r;
  }();
  return *registry;
}

std::optional<ExecutorFactory> builtin_executor_factory(const std::string& name) {
  if (name == "local") {
    return ExecutorFactory([](const ExecutorConfig& c) -> std::unique_ptr<Executor> {
      return std::make_unique<LocalExecutor>(c);
    });
  }
  if (name == "mock") return ExecutorFactory(make_mock_executor);
  if (auto profile = find_profile(name)) {
    return ExecutorFactory([p = *profile, name](const ExecutorConfig& c) -> std::unique_ptr<Executor> {
      return std::make_unique<BatchExecutor>(name, p, c);
    });
  }
  return std::nullopt;
}

void register_builtin_executors(PluginRegistry& registry) {
  for (const char* name : {"local", "slurm", "pbs", "lsf", "mock"}) {
    registry.register_executor({name, kBuiltinVersion, *builtin_executor_factory(name), "builtin"});
  }
}

}  // namespace psij
