#pragma once

namespace psij::detail {

/// Routes library diagnostics to stderr; SPDLOG_LEVEL adjusts verbosity.
/// Idempotent.
void init_logging();

}  // namespace psij::detail
