#include "stratacast/logging.hpp"

#include <cstdlib>
#include <mutex>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace stratacast {

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = std::make_shared<spdlog::logger>("stratacast", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    logger->set_pattern("[%l] %v");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("STRATACAST_LOG")) {
      const std::string_view v(env);
      if (v == "error") level = spdlog::level::err;
      else if (v == "warn") level = spdlog::level::warn;
      else if (v == "info") level = spdlog::level::info;
      else if (v == "debug") level = spdlog::level::debug;
    }
    logger->set_level(level);
    spdlog::set_default_logger(std::move(logger));
  });
}

}  // namespace stratacast
