#pragma once

#include <string_view>

namespace aspo {

enum class LogLevel { Quiet, Warning, Info };

void setLogLevel(LogLevel level);
LogLevel logLevel();
void logWarning(std::string_view msg);
void logInfo(std::string_view msg);

}  // namespace aspo
