#include "logging.hpp"

#include <mutex>

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace psij::detail {

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::get("psij");
    if (!logger) logger = spdlog::stderr_color_mt("psij");
    spdlog::set_default_logger(logger);
    spdlog::cfg::load_env_levels();
  });
}

}  // namespace psij::detail
