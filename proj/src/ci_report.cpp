#include "psij/ci_report.hpp"

#include <openssl/evp.h>
#include <sys/utsname.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "psij/errors.hpp"

namespace psij {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kPass: return "pass";
    case Outcome::kFail: return "fail";
    case Outcome::kSkip: return "skip";
  }
  return "fail";
}

Outcome parse_outcome(std::string_view text) {
  if (text == "pass") return Outcome::kPass;
  if (text == "fail") return Outcome::kFail;
  if (text == "skip") return Outcome::kSkip;
  throw ParseError("unknown outcome '" + std::string(text) + "'");
}

std::string_view to_string(UploadOutcome outcome) {
  switch (outcome) {
    case UploadOutcome::kAccepted: return "accepted";
    case UploadOutcome::kSpooled: return "spooled";
    case UploadOutcome::kRejected: return "rejected";
  }
  return "spooled";
}

std::size_t TestReport::count(Outcome outcome) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const TestRecord& r) { return r.outcome == outcome; }));
}

std::string cap_capture(std::string_view text, std::size_t limit) {
  if (text.size() <= limit) return std::string(text);
  std::size_t cut = limit;
  // Back off over continuation bytes so a multi-byte sequence is not split.
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  std::string out(text.substr(0, cut));
  out += kTruncationMarker;
  return out;
}

std::string host_os_fingerprint() {
  utsname u{};
  if (uname(&u) != 0) return "unknown";
  return std::string(u.sysname) + " " + u.release + " " + u.machine;
}

TestReport collect_report(std::istream& results, const ReportContext& context, std::size_t* skipped_lines) {
  TestReport report;
  report.site_id = context.site_id;
  report.submitter_email = context.submitter_email;
  report.run_timestamp = context.run_timestamp;
  report.fingerprint = context.fingerprint;

  std::size_t skipped = 0;
  std::map<std::string, int> seen;
  std::set<std::string> used;
  std::string line;
  while (std::getline(results, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TestRecord r;
    try {
      const json j = json::parse(line);
      r.name = j.at("name").get<std::string>();
      r.outcome = parse_outcome(j.at("outcome").get<std::string>());
      if (j.contains("duration_ms")) r.duration = std::chrono::milliseconds(j["duration_ms"].get<std::int64_t>());
      if (j.contains("stdout")) r.stdout_text = cap_capture(j["stdout"].get<std::string>());
      if (j.contains("stderr")) r.stderr_text = cap_capture(j["stderr"].get<std::string>());
      if (j.contains("log")) r.log_excerpt = cap_capture(j["log"].get<std::string>());
    } catch (const std::exception&) {
      ++skipped;
      continue;
    }
    if (used.count(r.name)) {
      int& n = seen[r.name];
      std::string candidate;
      do {
        candidate = r.name + " #" + std::to_string(++n + 1);
      } while (used.count(candidate));
      r.name = candidate;
    }
    used.insert(r.name);
    report.records.push_back(std::move(r));
  }
  if (skipped_lines) *skipped_lines = skipped;
  return report;
}

json to_json(const TestReport& report) {
  json records = json::array();
  for (const auto& r : report.records) {
    records.push_back({{"name", r.name},
                       {"outcome", std::string(to_string(r.outcome))},
                       {"duration_ms", r.duration.count()},
                       {"stdout", r.stdout_text},
                       {"stderr", r.stderr_text},
                       {"log_excerpt", r.log_excerpt}});
  }
  return {{"site_id", report.site_id},
          {"run_timestamp", format_timestamp(report.run_timestamp)},
          {"submitter_email", report.submitter_email},
          {"fingerprint", {{"os", report.fingerprint.os}, {"scheduler_profile", report.fingerprint.scheduler_profile}}},
          {"totals",
           {{"pass", report.count(Outcome::kPass)},
            {"fail", report.count(Outcome::kFail)},
            {"skip", report.count(Outcome::kSkip)}}},
          {"records", records}};
}

TestReport test_report_from_json(const json& j) {
  try {
    TestReport r;
    r.site_id = j.at("site_id").get<std::string>();
    const auto ts = parse_timestamp(j.at("run_timestamp").get<std::string>());
    if (!ts) throw ParseError("run_timestamp: invalid timestamp");
    r.run_timestamp = *ts;
    r.submitter_email = j.at("submitter_email").get<std::string>();
    const auto& fp = j.at("fingerprint");
    r.fingerprint.os = fp.at("os").get<std::string>();
    r.fingerprint.scheduler_profile = fp.at("scheduler_profile").get<std::string>();
    std::set<std::string> names;
    for (const auto& rec : j.at("records")) {
      TestRecord t;
      t.name = rec.at("name").get<std::string>();
      if (!names.insert(t.name).second) throw ParseError("records: duplicate test name '" + t.name + "'");
      t.outcome = parse_outcome(rec.at("outcome").get<std::string>());
      t.duration = std::chrono::milliseconds(rec.value("duration_ms", std::int64_t{0}));
      t.stdout_text = rec.value("stdout", std::string());
      t.stderr_text = rec.value("stderr", std::string());
      t.log_excerpt = rec.value("log_excerpt", std::string());
      r.records.push_back(std::move(t));
    }
    if (j.contains("totals")) {
      const auto& t = j["totals"];
      if (t.value("pass", std::size_t{0}) != r.count(Outcome::kPass) ||
          t.value("fail", std::size_t{0}) != r.count(Outcome::kFail) ||
          t.value("skip", std::size_t{0}) != r.count(Outcome::kSkip))
        throw ParseError("totals do not match records");
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::string canonical_json(const TestReport& report) {
  // nlohmann::json objects are std::map backed, so keys come out sorted.
  return to_json(report).dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

fs::path default_outbox() {
  if (const char* p = std::getenv("PSIJ_REPORT_OUTBOX"); p && *p) return p;
  if (const char* h = std::getenv("HOME"); h && *h) return fs::path(h) / ".psij-kit" / "outbox";
  return fs::temp_directory_path() / "psij-kit-outbox";
}

namespace {

void write_atomically(const fs::path& path, const std::string& body) {
  fs::create_directories(path.parent_path());
  // Unique temp name: several processes may spool concurrently.
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." +
                       std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

bool retriable(int status) { return status == 0 || status == 429 || status >= 500; }

bool accepted(int status) { return (status >= 200 && status < 300) || status == 409; }

}  // namespace

ReportUploader::ReportUploader(std::string endpoint, UploadOptions options) : options_(std::move(options)) {
  if (options_.outbox.empty()) options_.outbox = default_outbox();
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (options_.max_attempts < 1) options_.max_attempts = 1;
  while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
  const auto scheme = endpoint.find("://");
  const auto path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = endpoint;
  } else {
    scheme_host_port_ = endpoint.substr(0, path_start);
    base_path_ = endpoint.substr(path_start);
  }
  if (scheme_host_port_.empty()) throw Error("report endpoint is empty");
}

ReportUploader::Attempt ReportUploader::post(const std::string& body, const std::string& hash) const {
  Attempt a;
  try {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.request_timeout);
    client.set_read_timeout(options_.request_timeout);
    client.set_write_timeout(options_.request_timeout);
    httplib::Headers headers{{"X-Content-Hash", hash}};
    auto res = client.Post(base_path_ + "/reports", headers, body, "application/json");
    if (!res) {
      a.error = httplib::to_string(res.error());
      return a;
    }
    a.status = res->status;
    a.body = res->body;
  } catch (const std::exception& e) {
    a.error = e.what();
  }
  return a;
}

UploadResult ReportUploader::upload(const TestReport& report) { return upload_body(canonical_json(report)); }

UploadResult ReportUploader::upload_body(const std::string& body) {
  UploadResult result;
  result.content_hash = sha256_hex(body);
  auto backoff = options_.base_backoff;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    result.attempts = attempt;
    const Attempt a = post(body, result.content_hash);
    result.last_http_status = a.status;
    if (accepted(a.status)) {
      result.outcome = UploadOutcome::kAccepted;
      result.message = a.status == 409 ? "duplicate" : a.body;
      try {
        if (auto j = json::parse(a.body); j.is_object() && j.contains("status")) result.message = j["status"].get<std::string>();
      } catch (const std::exception&) {
      }
      return result;
    }
    if (!retriable(a.status)) {
      result.outcome = UploadOutcome::kRejected;
      result.message = "HTTP " + std::to_string(a.status) + (a.body.empty() ? "" : ": " + a.body);
      result.outbox_file = options_.outbox / (result.content_hash + ".rejected.json");
      write_atomically(result.outbox_file, body);
      return result;
    }
    result.message = a.status ? "HTTP " + std::to_string(a.status) : a.error;
    if (attempt < options_.max_attempts) {
      options_.sleep(backoff);
      backoff *= 2;
    }
  }
  result.outcome = UploadOutcome::kSpooled;
  result.outbox_file = options_.outbox / (result.content_hash + ".json");
  write_atomically(result.outbox_file, body);
  return result;
}

std::vector<UploadResult> ReportUploader::resend() {
  std::vector<fs::path> spooled;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(options_.outbox, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json" || name.find(".rejected.") != std::string::npos) continue;
    spooled.push_back(entry.path());
  }
  std::sort(spooled.begin(), spooled.end());
  std::vector<UploadResult> results;
  for (const auto& path : spooled) {
    std::ifstream in(path, std::ios::binary);
    if (!in) continue;  // drained by a concurrent resend
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string body = ss.str();
    // upload_body rewrites the same file name on failure, so the spool is
    // left as it was.
    auto r = upload_body(body);
    if (r.outcome != UploadOutcome::kSpooled) fs::remove(path, ec);
    if (r.outcome == UploadOutcome::kSpooled) r.outbox_file = path;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace psij
