#pragma once

// Test-run reports for the testing dashboard: collection from a JSON-lines
// result stream, canonical serialization, and upload with retry and an
// on-disk outbox.

#include <chrono>
#include <filesystem>
#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "psij/job_model.hpp"

namespace psij {

enum class Outcome { kPass, kFail, kSkip };

std::string_view to_string(Outcome outcome);
/// "pass" | "fail" | "skip"; throws ParseError.
Outcome parse_outcome(std::string_view text);

struct TestRecord {
  std::string name;
  Outcome outcome = Outcome::kPass;
  std::chrono::milliseconds duration{0};
  std::string stdout_text;
  std::string stderr_text;
  std::string log_excerpt;

  bool operator==(const TestRecord&) const = default;
};

struct Fingerprint {
  std::string os;
  std::string scheduler_profile;

  bool operator==(const Fingerprint&) const = default;
};

struct TestReport {
  std::string site_id;
  Timestamp run_timestamp{};
  std::string submitter_email;
  Fingerprint fingerprint;
  std::vector<TestRecord> records;

  std::size_t count(Outcome outcome) const;
  bool operator==(const TestReport&) const = default;
};

constexpr std::size_t kCaptureLimit = 64 * 1024;
constexpr std::string_view kTruncationMarker = "\n[... truncated by psij report ...]\n";

/// At most `limit` bytes of `text` (cut on a UTF-8 boundary) followed by
/// the truncation marker when anything was dropped.
std::string cap_capture(std::string_view text, std::size_t limit = kCaptureLimit);

struct ReportContext {
  std::string site_id;
  std::string submitter_email;
  Timestamp run_timestamp{};
  Fingerprint fingerprint;
};

/// "<sysname> <release> <machine>" of the running host.
std::string host_os_fingerprint();

/// One JSON object per line:
///   {"name": str, "outcome": "pass"|"fail"|"skip", "duration_ms": int,
///    "stdout": str, "stderr": str, "log": str}
/// Only name and outcome are required. Blank and malformed lines are skipped
/// (and counted in `skipped_lines` when given). Repeated names get a " #N"
/// suffix so names stay unique.
TestReport collect_report(std::istream& results, const ReportContext& context, std::size_t* skipped_lines = nullptr);

nlohmann::json to_json(const TestReport& report);
/// Throws ParseError.
TestReport test_report_from_json(const nlohmann::json& j);

/// Compact JSON with sorted keys; identical reports give identical bytes.
std::string canonical_json(const TestReport& report);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

enum class UploadOutcome { kAccepted, kSpooled, kRejected };

std::string_view to_string(UploadOutcome outcome);

struct UploadResult {
  UploadOutcome outcome = UploadOutcome::kSpooled;
  int attempts = 0;
  int last_http_status = 0;  // 0 when no response was received
  std::string message;
  std::string content_hash;
  std::filesystem::path outbox_file;  // spooled or rejected copy
};

struct UploadOptions {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{1000};
  std::chrono::milliseconds request_timeout{10'000};
  std::filesystem::path outbox;  // empty selects default_outbox()
  // Replaceable for tests.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// $PSIJ_REPORT_OUTBOX, else ~/.psij-kit/outbox.
std::filesystem::path default_outbox();

/// POSTs reports to "<endpoint>/reports" with an X-Content-Hash header.
///
/// 2xx (including {"status":"duplicate"}) and 409 count as accepted. 5xx,
/// 429 and connection errors are retried with exponential backoff; after the
/// last attempt the body is spooled to "<outbox>/<hash>.json". Other 4xx
/// responses are rejections: the body is kept as "<outbox>/<hash>.rejected.json"
/// and not retried.
class ReportUploader {
 public:
  explicit ReportUploader(std::string endpoint, UploadOptions options = {});

  UploadResult upload(const TestReport& report);
  UploadResult upload_body(const std::string& body);

  /// Re-sends every spooled report; accepted ones leave the outbox.
  std::vector<UploadResult> resend();

  const std::filesystem::path& outbox() const { return options_.outbox; }

 private:
  struct Attempt {
    int status = 0;
    std::string body;
    std::string error;
  };
  Attempt post(const std::string& body, const std::string& hash) const;

  std::string scheme_host_port_;
  std::string base_path_;
  UploadOptions options_;
};

}  // namespace psij
