#include "aspo/log.hpp"

#include <atomic>
#include <iostream>

namespace aspo {

namespace {
std::atomic<LogLevel> gLevel{LogLevel::Warning};
}

void setLogLevel(LogLevel level) { gLevel = level; }
LogLevel logLevel() { return gLevel; }

void logWarning(std::string_view msg) {
  if (gLevel >= LogLevel::Warning) std::clog << "[aspo] warning: " << msg << '\n';
}

void logInfo(std::string_view msg) {
  if (gLevel >= LogLevel::Info) std::clog << "[aspo] " << msg << '\n';
}

}  // namespace aspo
