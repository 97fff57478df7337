#include "psij/job_model.hpp"

#include <ctime>
#include <deque>
#include <sstream>

#include "psij/errors.hpp"

namespace psij {

Timestamp now_ms() { return std::chrono::time_point_cast<std::chrono::milliseconds>(Clock::now()); }

std::string format_timestamp(Timestamp t) {
  const auto ms = t.time_since_epoch().count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  int frac = static_cast<int>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, frac);
  return out;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  std::tm tm{};
  int ms = 0;
  std::string s(text);
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                  &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms, &consumed) != 7 ||
      consumed != static_cast<int>(s.size())) {
    return std::nullopt;
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t secs = timegm(&tm);
  return Timestamp(std::chrono::milliseconds(static_cast<std::int64_t>(secs) * 1000 + ms));
}

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::kNew: return "NEW";
    case JobState::kQueued: return "QUEUED";
    case JobState::kActive: return "ACTIVE";
    case JobState::kCompleted: return "COMPLETED";
    case JobState::kFailed: return "FAILED";
    case JobState::kCanceled: return "CANCELED";
  }
  return "?";
}

std::optional<JobState> parse_job_state(std::string_view text) {
  for (JobState s : kAllJobStates) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

bool validate_transition(JobState from, JobState to) {
  switch (from) {
    case JobState::kNew:
      return to == JobState::kQueued;
    case JobState::kQueued:
      return to == JobState::kActive || to == JobState::kCanceled || to == JobState::kFailed;
    case JobState::kActive:
      return to == JobState::kCompleted || to == JobState::kFailed || to == JobState::kCanceled;
    case JobState::kCompleted:
    case JobState::kFailed:
    case JobState::kCanceled:
      return false;
  }
  return false;
}

std::vector<JobState> transition_path(JobState from, JobState to) {
  if (from == to) return {};
  // Breadth-first over a six-node graph.
  std::map<JobState, JobState> parent;
  std::deque<JobState> frontier{from};
  parent.emplace(from, from);
  while (!frontier.empty()) {
    const JobState cur = frontier.front();
    frontier.pop_front();
    for (JobState next : kAllJobStates) {
      if (!validate_transition(cur, next) || parent.count(next)) continue;
      parent.emplace(next, cur);
      if (next == to) {
        std::vector<JobState> path{to};
        for (JobState p = cur; p != from; p = parent.at(p)) path.insert(path.begin(), p);
        return path;
      }
      frontier.push_back(next);
    }
  }
  return {};
}

JobStatus make_status(JobState state, std::optional<int> exit_code, std::optional<std::string> message) {
  JobStatus s;
  s.state = state;
  s.timestamp = now_ms();
  s.exit_code = exit_code;
  s.message = std::move(message);
  return s;
}

std::string_view to_string(EnvironmentPolicy policy) {
  return policy == EnvironmentPolicy::kInheritAll ? "inherit-all" : "inherit-none";
}

std::optional<EnvironmentPolicy> parse_environment_policy(std::string_view text) {
  if (text == "inherit-all") return EnvironmentPolicy::kInheritAll;
  if (text == "inherit-none") return EnvironmentPolicy::kInheritNone;
  return std::nullopt;
}

std::optional<int> ResourceSpec::total_processes() const {
  if (process_count) return process_count;
  if (node_count && processes_per_node) return *node_count * *processes_per_node;
  return std::nullopt;
}

std::optional<int> ResourceSpec::resolved_processes_per_node() const {
  if (processes_per_node) return processes_per_node;
  if (process_count && node_count && *node_count > 0 && *process_count % *node_count == 0) {
    return *process_count / *node_count;
  }
  if (process_count && (!node_count || *node_count == 1)) return process_count;
  return std::nullopt;
}

namespace {

void check_positive(std::vector<Violation>& out, const char* field, const std::optional<int>& v) {
  if (v && *v <= 0) out.push_back({field, "must be a positive integer, got " + std::to_string(*v)});
}

void check_directive_text(std::vector<Violation>& out, const std::string& field,
                          const std::optional<std::string>& v) {
  if (v && (v->empty() || v->find('\n') != std::string::npos)) {
    out.push_back({field, "must be non-empty and single-line"});
  }
}

}  // namespace

std::vector<Violation> validate_spec(const JobSpec& spec) {
  std::vector<Violation> out;
  if (spec.executable.empty()) out.push_back({"executable", "executable empty"});
  if (spec.directory && (spec.directory->empty() || spec.directory->front() != '/')) {
    out.push_back({"directory", "must be an absolute path"});
  }
  for (const auto& [key, value] : spec.environment_overrides) {
    if (key.empty()) out.push_back({"environment_overrides", "empty variable name"});
    if (key.find('=') != std::string::npos) {
      out.push_back({"environment_overrides", "variable name '" + key + "' contains '='"});
    }
  }
  for (const auto* p : {&spec.stdin_path, &spec.stdout_path, &spec.stderr_path}) {
    if (*p && p->value().empty()) out.push_back({"io", "redirection path must be non-empty"});
  }
  if (spec.stdout_path && spec.stderr_path && *spec.stdout_path == *spec.stderr_path &&
      !spec.attributes.merge_output) {
    out.push_back({"stderr_path", "stdout_path and stderr_path are equal without merge_output"});
  }
  if (spec.attributes.merge_output && spec.stderr_path &&
      (!spec.stdout_path || *spec.stdout_path != *spec.stderr_path)) {
    out.push_back({"stderr_path", "merge_output set but stderr_path differs from stdout_path"});
  }

  const ResourceSpec& r = spec.resources;
  check_positive(out, "resources.node_count", r.node_count);
  check_positive(out, "resources.processes_per_node", r.processes_per_node);
  check_positive(out, "resources.process_count", r.process_count);
  check_positive(out, "resources.cpu_cores_per_process", r.cpu_cores_per_process);
  if (r.gpu_cores_per_process && *r.gpu_cores_per_process < 0) {
    out.push_back({"resources.gpu_cores_per_process", "must be non-negative"});
  }
  if (r.node_count && r.processes_per_node && r.process_count &&
      static_cast<long long>(*r.node_count) * *r.processes_per_node != *r.process_count) {
    std::ostringstream msg;
    msg << "product relation " << *r.node_count << "×" << *r.processes_per_node << "≠"
        << *r.process_count;
    out.push_back({"resources.process_count", msg.str()});
  }

  const JobAttributes& a = spec.attributes;
  if (a.duration && (a.duration->count() <= 0 || *a.duration > kMaxDuration)) {
    out.push_back({"attributes.duration", "must be positive and at most 365 days"});
  }
  check_directive_text(out, "attributes.queue_name", a.queue_name);
  check_directive_text(out, "attributes.account", a.account);
  check_directive_text(out, "attributes.reservation", a.reservation);
  check_directive_text(out, "name", spec.name);
  if (spec.launcher && spec.launcher->empty()) out.push_back({"launcher", "empty launcher name"});
  return out;
}

void require_valid(const JobSpec& spec) {
  auto violations = validate_spec(spec);
  if (violations.empty()) return;
  std::vector<std::string> lines;
  std::string what = "invalid job spec";
  for (const auto& v : violations) {
    lines.push_back(v.to_string());
    what += "; " + v.to_string();
  }
  throw InvalidSpec(what, std::move(lines));
}

std::optional<std::chrono::milliseconds> parse_iso8601_duration(std::string_view text) {
  if (text.size() < 3 || text.front() != 'P') return std::nullopt;
  std::int64_t total = 0;
  bool in_time = false;
  bool any = false;
  // Designators must appear in order; `rank` enforces it.
  int rank = 0;
  std::size_t i = 1;
  while (i < text.size()) {
    if (text[i] == 'T') {
      if (in_time || i + 1 == text.size()) return std::nullopt;
      in_time = true;
      ++i;
      continue;
    }
    std::size_t j = i;
    std::int64_t whole = 0;
    while (j < text.size() && text[j] >= '0' && text[j] <= '9') {
      whole = whole * 10 + (text[j] - '0');
      if (whole > 1'000'000'000LL) return std::nullopt;
      ++j;
    }
    if (j == i) return std::nullopt;
    std::int64_t frac_ms = 0;
    bool has_frac = false;
    if (j < text.size() && (text[j] == '.' || text[j] == ',')) {
      has_frac = true;
      ++j;
      std::size_t digits = 0;
      double scale = 100;
      double acc = 0;
      while (j < text.size() && text[j] >= '0' && text[j] <= '9') {
        acc += (text[j] - '0') * scale;
        scale /= 10;
        ++j;
        ++digits;
      }
      if (digits == 0) return std::nullopt;
      frac_ms = static_cast<std::int64_t>(acc + 0.5);
    }
    if (j >= text.size()) return std::nullopt;
    const char unit = text[j];
    std::int64_t scale_ms = 0;
    int unit_rank = 0;
    if (!in_time) {
      if (unit == 'W') { scale_ms = 7LL * 86'400'000; unit_rank = 1; }
      else if (unit == 'D') { scale_ms = 86'400'000; unit_rank = 2; }
      else return std::nullopt;
    } else {
      if (unit == 'H') { scale_ms = 3'600'000; unit_rank = 3; }
      else if (unit == 'M') { scale_ms = 60'000; unit_rank = 4; }
      else if (unit == 'S') { scale_ms = 1000; unit_rank = 5; }
      else return std::nullopt;
    }
    if (unit_rank <= rank) return std::nullopt;
    if (has_frac && unit != 'S') return std::nullopt;
    rank = unit_rank;
    total += whole * scale_ms + frac_ms;
    any = true;
    i = j + 1;
  }
  if (!any) return std::nullopt;
  return std::chrono::milliseconds(total);
}

std::string format_iso8601_duration(std::chrono::milliseconds d) {
  std::int64_t ms = d.count();
  if (ms < 0) ms = 0;
  if (ms == 0) return "PT0S";
  std::string out = "P";
  const std::int64_t days = ms / 86'400'000;
  ms %= 86'400'000;
  if (days) out += std::to_string(days) + "D";
  if (ms) {
    out += "T";
    const std::int64_t h = ms / 3'600'000;
    ms %= 3'600'000;
    const std::int64_t m = ms / 60'000;
    ms %= 60'000;
    if (h) out += std::to_string(h) + "H";
    if (m) out += std::to_string(m) + "M";
    if (ms) {
      out += std::to_string(ms / 1000);
      if (ms % 1000) {
        char frac[8];
        std::snprintf(frac, sizeof frac, ".%03d", static_cast<int>(ms % 1000));
        std::string f(frac);
        while (f.back() == '0') f.pop_back();
        out += f;
      }
      out += "S";
    }
  }
  return out;
}

}  // namespace psij
