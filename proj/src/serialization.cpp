#include "psij/serialization.hpp"

#include <fstream>
#include <set>

#include "psij/errors.hpp"

namespace psij {

using nlohmann::json;

namespace {

template <typename T>
void put(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

void put_map(json& j, const char* key, const std::map<std::string, std::string>& m) {
  if (!m.empty()) j[key] = m;
}

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ParseError("field '" + field + "': " + why);
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  std::set<std::string> allowed(known.begin(), known.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) fail(where + it.key(), "unknown field");
  }
}

std::optional<std::string> get_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  if (!j[key].is_string()) fail(where + key, "expected string");
  return j[key].get<std::string>();
}

std::optional<int> get_int(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  const json& v = j[key];
  if (!v.is_number_integer()) fail(where + key, "expected integer");
  const auto n = v.get<long long>();
  if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
    fail(where + key, "out of range");
  }
  return static_cast<int>(n);
}

std::map<std::string, std::string> get_string_map(const json& j, const char* key, const std::string& where) {
  std::map<std::string, std::string> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_object()) fail(where + key, "expected object");
  for (auto it = j[key].begin(); it != j[key].end(); ++it) {
    if (!it.value().is_string()) fail(where + key + "." + it.key(), "expected string");
    out.emplace(it.key(), it.value().get<std::string>());
  }
  return out;
}

}  // namespace

json to_json(const JobSpec& spec) {
  json j = json::object();
  j["executable"] = spec.executable;
  if (!spec.arguments.empty()) j["arguments"] = spec.arguments;
  put(j, "directory", spec.directory);
  if (spec.environment_policy) j["environment_policy"] = std::string(to_string(*spec.environment_policy));
  put_map(j, "environment_overrides", spec.environment_overrides);
  put(j, "stdin_path", spec.stdin_path);
  put(j, "stdout_path", spec.stdout_path);
  put(j, "stderr_path", spec.stderr_path);

  json r = json::object();
  put(r, "node_count", spec.resources.node_count);
  put(r, "processes_per_node", spec.resources.processes_per_node);
  put(r, "process_count", spec.resources.process_count);
  put(r, "cpu_cores_per_process", spec.resources.cpu_cores_per_process);
  put(r, "gpu_cores_per_process", spec.resources.gpu_cores_per_process);
  put(r, "exclusive_node_use", spec.resources.exclusive_node_use);
  if (!r.empty()) j["resources"] = r;

  json a = json::object();
  if (spec.attributes.duration) a["duration"] = format_iso8601_duration(*spec.attributes.duration);
  put(a, "queue_name", spec.attributes.queue_name);
  put(a, "account", spec.attributes.account);
  put(a, "reservation", spec.attributes.reservation);
  put_map(a, "custom", spec.attributes.custom);
  if (spec.attributes.merge_output) a["merge_output"] = true;
  if (!a.empty()) j["attributes"] = a;

  put(j, "name", spec.name);
  put(j, "launcher", spec.launcher);
  return j;
}

JobSpec job_spec_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("job spec must be a JSON object");
  reject_unknown(j, "", {"executable", "arguments", "directory", "environment_policy",
                         "environment_overrides", "stdin_path", "stdout_path", "stderr_path",
                         "resources", "attributes", "name", "launcher"});
  JobSpec spec;
  auto exe = get_string(j, "executable", "");
  if (!exe) fail("executable", "required");
  spec.executable = *exe;
  if (j.contains("arguments")) {
    if (!j["arguments"].is_array()) fail("arguments", "expected array");
    for (const auto& a : j["arguments"]) {
      if (!a.is_string()) fail("arguments", "expected array of strings");
      spec.arguments.push_back(a.get<std::string>());
    }
  }
  spec.directory = get_string(j, "directory", "");
  if (auto p = get_string(j, "environment_policy", "")) {
    spec.environment_policy = parse_environment_policy(*p);
    if (!spec.environment_policy) fail("environment_policy", "expected inherit-all or inherit-none");
  }
  spec.environment_overrides = get_string_map(j, "environment_overrides", "");
  spec.stdin_path = get_string(j, "stdin_path", "");
  spec.stdout_path = get_string(j, "stdout_path", "");
  spec.stderr_path = get_string(j, "stderr_path", "");

  if (j.contains("resources")) {
    const json& r = j["resources"];
    if (!r.is_object()) fail("resources", "expected object");
    reject_unknown(r, "resources.", {"node_count", "processes_per_node", "process_count",
                                     "cpu_cores_per_process", "gpu_cores_per_process",
                                     "exclusive_node_use"});
    spec.resources.node_count = get_int(r, "node_count", "resources.");
    spec.resources.processes_per_node = get_int(r, "processes_per_node", "resources.");
    spec.resources.process_count = get_int(r, "process_count", "resources.");
    spec.resources.cpu_cores_per_process = get_int(r, "cpu_cores_per_process", "resources.");
    spec.resources.gpu_cores_per_process = get_int(r, "gpu_cores_per_process", "resources.");
    if (r.contains("exclusive_node_use")) {
      if (!r["exclusive_node_use"].is_boolean()) fail("resources.exclusive_node_use", "expected boolean");
      spec.resources.exclusive_node_use = r["exclusive_node_use"].get<bool>();
    }
  }

  if (j.contains("attributes")) {
    const json& a = j["attributes"];
    if (!a.is_object()) fail("attributes", "expected object");
    reject_unknown(a, "attributes.", {"duration", "queue_name", "account", "reservation", "custom",
                                      "merge_output"});
    if (auto d = get_string(a, "duration", "attributes.")) {
      spec.attributes.duration = parse_iso8601_duration(*d);
      if (!spec.attributes.duration) fail("attributes.duration", "not an ISO-8601 duration: " + *d);
    }
    spec.attributes.queue_name = get_string(a, "queue_name", "attributes.");
    spec.attributes.account = get_string(a, "account", "attributes.");
    spec.attributes.reservation = get_string(a, "reservation", "attributes.");
    spec.attributes.custom = get_string_map(a, "custom", "attributes.");
    if (a.contains("merge_output")) {
      if (!a["merge_output"].is_boolean()) fail("attributes.merge_output", "expected boolean");
      spec.attributes.merge_output = a["merge_output"].get<bool>();
    }
  }
  spec.name = get_string(j, "name", "");
  spec.launcher = get_string(j, "launcher", "");
  return spec;
}

json to_json(const JobStatus& status) {
  json j = json::object();
  j["state"] = std::string(to_string(status.state));
  j["timestamp"] = format_timestamp(status.timestamp);
  put(j, "exit_code", status.exit_code);
  put(j, "message", status.message);
  put_map(j, "metadata", status.metadata);
  return j;
}

JobStatus job_status_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("job status must be a JSON object");
  JobStatus s;
  auto state = get_string(j, "state", "");
  if (!state) fail("state", "required");
  auto parsed = parse_job_state(*state);
  if (!parsed) fail("state", "unknown state " + *state);
  s.state = *parsed;
  if (auto ts = get_string(j, "timestamp", "")) {
    auto t = parse_timestamp(*ts);
    if (!t) fail("timestamp", "not an RFC 3339 timestamp");
    s.timestamp = *t;
  }
  s.exit_code = get_int(j, "exit_code", "");
  s.message = get_string(j, "message", "");
  s.metadata = get_string_map(j, "metadata", "");
  return s;
}

json to_json(const Job& job) {
  json j = json::object();
  j["id"] = job.id();
  if (auto nid = job.native_id()) j["native_id"] = *nid;
  if (job.spec()) j["spec"] = to_json(*job.spec());
  j["status"] = to_json(job.status());
  json h = json::array();
  for (const auto& s : job.history()) h.push_back(to_json(s));
  j["history"] = h;
  return j;
}

JobSpec load_job_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open job file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("job file " + path + " is not valid JSON: " + e.what());
  }
  return job_spec_from_json(j);
}

}  // namespace psij
