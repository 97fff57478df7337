#pragma once

// Canonical JSON forms. Field names follow the data model; absent optional
// fields and empty collections are omitted. The JobSpec form doubles as the
// CLI job-file format.

#include <string>

#include "json.hpp"
#include "psij/job.hpp"
#include "psij/job_model.hpp"

namespace psij {

nlohmann::json to_json(const JobSpec& spec);
/// Throws ParseError naming the offending field.
JobSpec job_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const JobStatus& status);
JobStatus job_status_from_json(const nlohmann::json& j);

/// Snapshot of a job handle: id, native_id, spec (if known), status, history.
nlohmann::json to_json(const Job& job);

JobSpec load_job_spec(const std::string& path);

}  // namespace psij
