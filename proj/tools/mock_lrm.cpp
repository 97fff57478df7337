// Simulated batch scheduler. One binary answers to sbatch/squeue/scancel,
// qsub/qstat/qdel, bsub/bjobs/bkill and mock-submit/mock-status/mock-cancel
// (by argv[0] or first argument), keeping all state in $MOCK_LRM_DIR.
//
// Jobs move PD -> R -> CD|F (or CA) lazily: every invocation re-evaluates
// all jobs against the clock under an exclusive lock. Payloads run for real
// in a detached runner process once a job reaches R.

#include <fcntl.h>
#include <signal.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFaultMessage = "injected fault";

enum class Command { kSubmit, kStatus, kCancel };

struct Config {
  std::string clock = "wall";
  long long queue_latency_ms = 0;
  long long run_latency_ms = 0;
  long long age_out_ms = 10'000;
  std::string faults;
};

std::optional<std::string> getenv_str(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

long long wall_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_atomic(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
  }
  fs::rename(tmp, p);
}

std::string profile_for(const std::string& cmd) {
  if (auto p = getenv_str("MOCK_LRM_PROFILE")) return *p;
  if (cmd == "qsub" || cmd == "qstat" || cmd == "qdel") return "pbs";
  if (cmd == "bsub" || cmd == "bjobs" || cmd == "bkill") return "lsf";
  return "slurm";
}

// "submit:1,status:3" -> {submit:1, status:3}
std::map<std::string, long long> parse_faults(const std::string& spec) {
  std::map<std::string, long long> out;
  std::istringstream in(spec);
  for (std::string item; std::getline(in, item, ',');) {
    const auto colon = item.find(':');
    if (item.empty()) continue;
    const std::string key = item.substr(0, colon);
    long long n = 1;
    if (colon != std::string::npos) {
      try {
        n = std::stoll(item.substr(colon + 1));
      } catch (const std::exception&) {
        n = 0;
      }
    }
    out[key] += n;
  }
  return out;
}

class Store {
 public:
  explicit Store(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_ / "jobs");
    lock_fd_ = ::open((dir_ / "lock").c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (lock_fd_ < 0 || ::flock(lock_fd_, LOCK_EX) != 0) throw std::runtime_error("cannot lock state directory");
    const auto state_path = dir_ / "state.json";
    if (fs::exists(state_path)) {
      state_ = json::parse(read_file(state_path));
    } else {
      state_ = {{"next_id", 1},
                {"clock_ms", 0},
                {"counters", {{"submit", 0}, {"status", 0}, {"cancel", 0}}},
                {"fault_spec", ""},
                {"faults", json::object()},
                {"jobs", json::object()}};
    }
    load_config();
  }
  ~Store() {
    if (lock_fd_ >= 0) ::close(lock_fd_);  // releases the lock
  }
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  void save() { write_atomic(dir_ / "state.json", state_.dump()); }

  const fs::path& dir() const { return dir_; }
  const Config& config() const { return config_; }
  json& state() { return state_; }
  bool virtual_clock() const { return config_.clock == "virtual"; }
  long long now() const { return virtual_clock() ? state_["clock_ms"].get<long long>() : wall_ms(); }

  // Counts the invocation and reports whether an injected fault consumes it.
  bool count_and_check_fault(const std::string& command) {
    state_["counters"][command] = state_["counters"].value(command, 0LL) + 1;
    return consume_fault(command);
  }

  bool consume_fault(const std::string& kind) {
    auto& remaining = state_["faults"];
    const long long n = remaining.value(kind, 0LL);
    if (n <= 0) return false;
    remaining[kind] = n - 1;
    return true;
  }

  void write_config(const json& cfg) { write_atomic(dir_ / "config.json", cfg.dump(2) + "\n"); }

 private:
  void load_config() {
    json file = json::object();
    if (fs::exists(dir_ / "config.json")) file = json::parse(read_file(dir_ / "config.json"));
    config_.clock = file.value("clock", config_.clock);
    config_.queue_latency_ms = file.value("queue_latency_ms", config_.queue_latency_ms);
    config_.run_latency_ms = file.value("run_latency_ms", config_.run_latency_ms);
    config_.age_out_ms = file.value("age_out_ms", config_.age_out_ms);
    config_.faults = file.value("faults", config_.faults);
    if (auto v = getenv_str("MOCK_LRM_CLOCK")) config_.clock = *v;
    if (auto v = getenv_str("MOCK_LRM_QUEUE_LATENCY_MS")) config_.queue_latency_ms = std::stoll(*v);
    if (auto v = getenv_str("MOCK_LRM_RUN_LATENCY_MS")) config_.run_latency_ms = std::stoll(*v);
    if (auto v = getenv_str("MOCK_LRM_AGE_OUT_MS")) config_.age_out_ms = std::stoll(*v);
    if (const char* v = std::getenv("MOCK_LRM_FAULTS")) config_.faults = v;
    // A changed fault plan starts counting afresh.
    if (state_.value("fault_spec", std::string()) != config_.faults) {
      state_["fault_spec"] = config_.faults;
      json remaining = json::object();
      for (const auto& [k, n] : parse_faults(config_.faults)) remaining[k] = n;
      state_["faults"] = remaining;
    }
  }

  fs::path dir_;
  int lock_fd_ = -1;
  json state_;
  Config config_;
};

// --- payload execution ----------------------------------------------------

struct Outputs {
  std::string out;
  std::string err;
};

std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

// Output/error destinations from the script's directive block.
Outputs directive_outputs(const std::string& script, const std::string& profile, const fs::path& fallback) {
  Outputs o{fallback.string() + ".out", fallback.string() + ".err"};
  const std::string prefix = profile == "pbs" ? "#PBS" : profile == "lsf" ? "#BSUB" : "#SBATCH";
  std::istringstream in(script);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(prefix, 0) != 0) continue;
    std::istringstream words(line.substr(prefix.size()));
    std::string flag;
    words >> flag;
    std::string rest;
    std::getline(words, rest);
    const auto b = rest.find_first_not_of(' ');
    rest = b == std::string::npos ? "" : unquote(rest.substr(b));
    if (flag.rfind("--output=", 0) == 0) o.out = unquote(flag.substr(9));
    else if (flag.rfind("--error=", 0) == 0) o.err = unquote(flag.substr(8));
    else if (flag == "-o" && !rest.empty()) o.out = rest;
    else if (flag == "-e" && !rest.empty()) o.err = rest;
  }
  return o;
}

std::string job_id_variable(const std::string& profile) {
  if (profile == "pbs") return "PBS_JOBID";
  if (profile == "lsf") return "LSB_JOBID";
  return "SLURM_JOB_ID";
}

std::string display_id(long long id, const std::string& profile) {
  return profile == "pbs" ? std::to_string(id) + ".mockserver" : std::to_string(id);
}

int decode(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return 255;
}

// Starts the payload in a detached runner; returns the runner's process
// group id. The runner records "<exit code>\n" in jobs/<id>.rc when the
// payload ends on its own.
long long launch_runner(const Store& store, const json& job, const std::string& profile) {
  const long long id = job["id"].get<long long>();
  const fs::path script = store.dir() / "jobs" / (std::to_string(id) + ".sh");
  const fs::path rc = store.dir() / "jobs" / (std::to_string(id) + ".rc");
  const Outputs outputs = directive_outputs(read_file(script), profile, store.dir() / "jobs" / std::to_string(id));
  const std::string var = job_id_variable(profile);
  const std::string shown_id = display_id(id, profile);

  const pid_t leader = ::fork();
  if (leader < 0) return 0;
  if (leader == 0) {
    ::setsid();
    const pid_t runner = ::fork();
    if (runner == 0) {
      // Drop every inherited descriptor (the state lock and the caller's
      // pipes included) so the invoking command can finish independently.
      const int devnull = ::open("/dev/null", O_RDWR);
      ::dup2(devnull, 0);
      ::dup2(devnull, 1);
      ::dup2(devnull, 2);
      ::close_range(3, ~0U, 0);
      ::setenv(var.c_str(), shown_id.c_str(), 1);
      const pid_t payload = ::fork();
      if (payload == 0) {
        const int in = ::open("/dev/null", O_RDONLY);
        const int out = ::open(outputs.out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        const int err = outputs.err == outputs.out ? ::dup(out)
                                                   : ::open(outputs.err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (in >= 0) ::dup2(in, 0);
        if (out >= 0) ::dup2(out, 1);
        if (err >= 0) ::dup2(err, 2);
        ::close_range(3, ~0U, 0);
        ::execl("/bin/sh", "sh", script.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
      }
      int status = 0;
      while (::waitpid(payload, &status, 0) < 0 && errno == EINTR) {
      }
      const std::string tmp = rc.string() + ".tmp";
      if (FILE* f = std::fopen(tmp.c_str(), "w")) {
        std::fprintf(f, "%d\n", decode(status));
        std::fclose(f);
        std::rename(tmp.c_str(), rc.c_str());
      }
      ::_exit(0);
    }
    ::_exit(runner > 0 ? 0 : 1);
  }
  int status = 0;
  while (::waitpid(leader, &status, 0) < 0 && errno == EINTR) {
  }
  return leader;
}

std::optional<int> read_rc(const fs::path& p) {
  std::ifstream in(p);
  int code = 0;
  if (in >> code) return code;
  return std::nullopt;
}

// --- lazy transitions -------------------------------------------------------

void set_token(json& job, const std::string& token) {
  job["state"] = token;
  job["history"].push_back(token);
}

void evaluate(Store& store, const std::string& profile) {
  auto& jobs = store.state()["jobs"];
  for (auto& [key, job] : jobs.items()) {
    const std::string state = job["state"];
    if (state != "PD" && state != "R") continue;
    const long long now = store.now();
    if (state == "PD") {
      const long long start = job["submit_ms"].get<long long>() + job["queue_latency_ms"].get<long long>();
      if (now < start) continue;
      job["runner_pgid"] = launch_runner(store, job, profile);
      job["start_ms"] = store.virtual_clock() ? start : now;
      set_token(job, "R");
    }
    const long long end = job["start_ms"].get<long long>() + job["run_latency_ms"].get<long long>();
    if (now < end) continue;
    const fs::path rc = store.dir() / "jobs" / (key + ".rc");
    auto code = read_rc(rc);
    if (!code && store.virtual_clock()) {
      // Logical time says the job is over; wait for the real payload so
      // the outcome does not depend on process scheduling.
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
      while (!code && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        code = read_rc(rc);
      }
    }
    if (!code) continue;
    job["exit_code"] = *code;
    job["end_ms"] = store.virtual_clock() ? end : now;
    set_token(job, *code == 0 ? "CD" : "F");
  }
}

// --- output grammars -------------------------------------------------------

std::string token_for(const std::string& state, const std::string& profile) {
  if (profile == "pbs") {
    if (state == "PD") return "Q";
    if (state == "R") return "R";
    return "F";
  }
  if (profile == "lsf") {
    if (state == "PD") return "PEND";
    if (state == "R") return "RUN";
    if (state == "CD") return "DONE";
    return "EXIT";
  }
  if (state == "PD") return "PENDING";
  if (state == "R") return "RUNNING";
  if (state == "CD") return "COMPLETED";
  if (state == "F") return "FAILED";
  return "CANCELLED";
}

std::string fixed(std::string s, std::size_t width) {
  if (s.size() > width) s = s.substr(0, width);
  s.resize(width, ' ');
  return s;
}

std::string base_id(const std::string& arg) { return arg.substr(0, arg.find('.')); }

bool is_number(const std::string& s) {
  return !s.empty() && s.size() < 18 && s.find_first_not_of("0123456789") == std::string::npos;
}

// Requested job ids from squeue/qstat/bjobs style arguments.
std::vector<std::string> status_ids(const std::vector<std::string>& args) {
  std::vector<std::string> ids;
  auto add_list = [&](const std::string& list) {
    std::istringstream in(list);
    for (std::string id; std::getline(in, id, ',');) {
      if (!id.empty()) ids.push_back(id);
    }
  };
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--jobs=", 0) == 0) {
      add_list(a.substr(7));
    } else if (a == "-j" || a == "--jobs") {
      if (i + 1 < args.size()) add_list(args[++i]);
    } else if (a == "-o" || a == "-t" || a == "--format" || a == "-O" || a == "--states" || a == "-q") {
      ++i;  // option value
    } else if (!a.empty() && a[0] == '-') {
      continue;
    } else {
      ids.push_back(a);
    }
  }
  return ids;
}

int do_status(Store& store, const std::string& profile, const std::vector<std::string>& args) {
  if (store.count_and_check_fault("status")) {
    store.save();
    std::cerr << kFaultMessage << "\n";
    return 1;
  }
  evaluate(store, profile);
  const bool corrupt = store.consume_fault("corrupt");
  const long long now = store.now();
  const long long age_out = store.config().age_out_ms;
  auto& jobs = store.state()["jobs"];

  auto visible = [&](const json& job) {
    if (!job.contains("end_ms") || job["end_ms"].is_null()) return true;
    return now - job["end_ms"].get<long long>() <= age_out;
  };

  std::vector<const json*> rows;
  std::vector<std::string> unknown;
  const auto ids = status_ids(args);
  if (ids.empty()) {
    for (const auto& [k, job] : jobs.items()) {
      if (visible(job)) rows.push_back(&job);
    }
    std::sort(rows.begin(), rows.end(),
              [](const json* a, const json* b) { return (*a)["id"].get<long long>() < (*b)["id"].get<long long>(); });
  } else {
    for (const auto& id : ids) {
      const std::string key = base_id(id);
      if (is_number(key) && jobs.contains(key) && visible(jobs[key])) {
        rows.push_back(&jobs[key]);
      } else {
        unknown.push_back(id);
      }
    }
  }

  std::ostringstream out;
  if (profile == "pbs" && !rows.empty()) {
    out << "Job id            Name             User              Time Use S Queue\n";
    out << "----------------  ---------------- ----------------  -------- - -----\n";
  }
  for (const json* job : rows) {
    const long long id = (*job)["id"].get<long long>();
    std::string token = token_for((*job)["state"], profile);
    if (corrupt) token = "%" + std::to_string(id * 7919 % 1000) + "?";
    if (profile == "pbs") {
      out << fixed(display_id(id, profile), 17) << " " << fixed((*job).value("name", "job"), 16) << " "
          << fixed("mock", 17) << " 00:00:00 " << token << " batch\n";
    } else {
      out << id << " " << token << "\n";
    }
  }
  store.save();
  std::cout << out.str();
  for (const auto& id : unknown) {
    if (profile == "pbs") std::cerr << "qstat: Unknown Job Id " << id << "\n";
    if (profile == "lsf") std::cerr << "Job <" << id << "> is not found\n";
  }
  return profile == "pbs" && !unknown.empty() ? 153 : 0;
}

std::string job_name(const std::string& script, const std::string& profile, long long id) {
  const std::string prefix = profile == "pbs" ? "#PBS" : profile == "lsf" ? "#BSUB" : "#SBATCH";
  std::istringstream in(script);
  std::string name = "job" + std::to_string(id);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(prefix, 0) != 0) continue;
    std::istringstream words(line.substr(prefix.size()));
    std::string flag;
    std::string value;
    words >> flag;
    if (flag.rfind("--job-name=", 0) == 0) value = flag.substr(11);
    else if (flag == "-N" || flag == "-J") words >> value;
    if (!value.empty()) name = unquote(value);
  }
  for (char& c : name) {
    if (c == ' ' || c == '\t') c = '_';
  }
  return name;
}

int do_submit(Store& store, const std::string& profile, const std::vector<std::string>& args) {
  if (store.count_and_check_fault("submit")) {
    store.save();
    std::cerr << kFaultMessage << "\n";
    return 1;
  }
  std::vector<std::string> scripts;
  for (const auto& a : args) {
    if (!a.empty() && a[0] != '-') scripts.push_back(a);
  }
  std::vector<std::string> contents;
  if (scripts.empty()) {
    contents.push_back(std::string(std::istreambuf_iterator<char>(std::cin), {}));
  } else {
    for (const auto& s : scripts) {
      std::ifstream in(s, std::ios::binary);
      if (!in) {
        store.save();
        std::cerr << "mock-lrm: cannot read script " << s << "\n";
        return 1;
      }
      contents.push_back(std::string(std::istreambuf_iterator<char>(in), {}));
    }
  }
  auto& st = store.state();
  std::ostringstream out;
  for (const auto& content : contents) {
    const long long id = st["next_id"].get<long long>();
    st["next_id"] = id + 1;
    const fs::path copy = store.dir() / "jobs" / (std::to_string(id) + ".sh");
    write_atomic(copy, content);
    ::chmod(copy.c_str(), 0700);
    json job = {{"id", id},
                {"name", job_name(content, profile, id)},
                {"submit_ms", store.now()},
                {"queue_latency_ms", store.config().queue_latency_ms},
                {"run_latency_ms", store.config().run_latency_ms},
                {"state", "PD"},
                {"history", json::array({"PD"})}};
    st["jobs"][std::to_string(id)] = job;
    if (profile == "pbs") out << id << ".mockserver\n";
    else if (profile == "lsf") out << "Job <" << id << "> is submitted to default queue <normal>.\n";
    else out << "Submitted batch job " << id << "\n";
  }
  evaluate(store, profile);
  store.save();
  std::cout << out.str();
  return 0;
}

int do_cancel(Store& store, const std::string& profile, const std::string& cmd, const std::vector<std::string>& args) {
  if (store.count_and_check_fault("cancel")) {
    store.save();
    std::cerr << kFaultMessage << "\n";
    return 1;
  }
  evaluate(store, profile);
  int rc = 0;
  auto& jobs = store.state()["jobs"];
  for (const auto& a : args) {
    if (a.empty() || a[0] == '-') continue;
    const std::string key = base_id(a);
    if (!is_number(key) || !jobs.contains(key)) {
      std::cerr << cmd << ": unknown job " << a << "\n";
      rc = 1;
      continue;
    }
    json& job = jobs[key];
    const std::string state = job["state"];
    if (state == "PD") {
      set_token(job, "CA");
    } else if (state == "R") {
      const long long pgid = job.value("runner_pgid", 0LL);
      if (pgid > 1) ::kill(static_cast<pid_t>(-pgid), SIGKILL);
      set_token(job, "CA");
    } else {
      std::cerr << cmd << ": unknown job " << a << " (already finished)\n";
      rc = 1;
      continue;
    }
    job["end_ms"] = store.now();
  }
  store.save();
  return rc;
}

int do_ledger(Store& store, const std::string& profile) {
  evaluate(store, profile);
  store.save();
  const auto& st = store.state();
  json out = {{"clock_ms", store.now()}, {"counters", st["counters"]}, {"jobs", json::array()}};
  std::vector<json> jobs;
  for (const auto& [k, job] : st["jobs"].items()) jobs.push_back(job);
  std::sort(jobs.begin(), jobs.end(),
            [](const json& a, const json& b) { return a["id"].get<long long>() < b["id"].get<long long>(); });
  for (auto& j : jobs) {
    json row = {{"id", j["id"]},
                {"native_id", display_id(j["id"].get<long long>(), profile)},
                {"state", j["state"]},
                {"history", j["history"]}};
    row["exit_code"] = j.contains("exit_code") ? j["exit_code"] : json(nullptr);
    out["jobs"].push_back(row);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int do_counters(Store& store) {
  const auto& c = store.state()["counters"];
  std::cout << "submit " << c.value("submit", 0LL) << "\nstatus " << c.value("status", 0LL) << "\ncancel "
            << c.value("cancel", 0LL) << "\n";
  return 0;
}

int do_advance(Store& store, const std::string& profile, long long ms) {
  store.state()["clock_ms"] = store.state()["clock_ms"].get<long long>() + ms;
  evaluate(store, profile);
  store.save();
  std::cout << store.state()["clock_ms"].get<long long>() << "\n";
  return 0;
}

int usage() {
  std::cerr << "usage: mock-lrm <submit|status|cancel|advance MS|ledger|counters|configure> [args]\n"
               "       (or invoked as sbatch/squeue/scancel, qsub/qstat/qdel, bsub/bjobs/bkill)\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string cmd = fs::path(argv[0]).filename().string();
  static const std::map<std::string, Command> kCommands = {
      {"sbatch", Command::kSubmit}, {"qsub", Command::kSubmit},   {"bsub", Command::kSubmit},
      {"mock-submit", Command::kSubmit}, {"submit", Command::kSubmit},
      {"squeue", Command::kStatus}, {"qstat", Command::kStatus},  {"bjobs", Command::kStatus},
      {"mock-status", Command::kStatus}, {"status", Command::kStatus},
      {"scancel", Command::kCancel}, {"qdel", Command::kCancel}, {"bkill", Command::kCancel},
      {"mock-cancel", Command::kCancel}, {"cancel", Command::kCancel},
  };
  if (!kCommands.count(cmd)) {
    if (args.empty()) return usage();
    cmd = args.front();
    args.erase(args.begin());
  }
  const auto dir = getenv_str("MOCK_LRM_DIR");
  if (!dir) {
    std::cerr << "mock-lrm: MOCK_LRM_DIR is not set\n";
    return 2;
  }
  const std::string profile = profile_for(cmd);
  if (profile != "slurm" && profile != "pbs" && profile != "lsf") {
    std::cerr << "mock-lrm: unknown profile " << profile << "\n";
    return 2;
  }
  try {
    if (cmd == "configure") {
      CLI::App app{"mock-lrm configure"};
      std::optional<std::string> clock, faults;
      std::optional<long long> ql, rl, age;
      app.add_option("--clock", clock)->check(CLI::IsMember({"wall", "virtual"}));
      app.add_option("--queue-latency-ms", ql);
      app.add_option("--run-latency-ms", rl);
      app.add_option("--age-out-ms", age);
      app.add_option("--faults", faults);
      std::vector<std::string> rev(args.rbegin(), args.rend());
      app.parse(rev);
      Store store(*dir);
      json cfg = json::object();
      if (fs::exists(store.dir() / "config.json")) cfg = json::parse(read_file(store.dir() / "config.json"));
      if (clock) cfg["clock"] = *clock;
      if (ql) cfg["queue_latency_ms"] = *ql;
      if (rl) cfg["run_latency_ms"] = *rl;
      if (age) cfg["age_out_ms"] = *age;
      if (faults) cfg["faults"] = *faults;
      store.write_config(cfg);
      return 0;
    }
    if (cmd == "advance") {
      if (args.empty()) return usage();
      Store store(*dir);
      return do_advance(store, profile, std::stoll(args.front()));
    }
    Store store(*dir);
    if (cmd == "ledger") return do_ledger(store, profile);
    if (cmd == "counters") return do_counters(store);
    const auto it = kCommands.find(cmd);
    if (it == kCommands.end()) return usage();
    switch (it->second) {
      case Command::kSubmit:
        return do_submit(store, profile, args);
      case Command::kStatus:
        return do_status(store, profile, args);
      case Command::kCancel:
        return do_cancel(store, profile, cmd, args);
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "mock-lrm: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mock-lrm: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
