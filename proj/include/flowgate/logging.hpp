#pragma once

#include <functional>
#include <string>

namespace flowgate {

enum class LogLevel { Debug, Info, Warn, Error };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink; pass nullptr to restore the stderr default.
// The sink is invoked under a mutex, so it may be a plain capture.
void set_log_sink(LogSink sink);

void log(LogLevel level, const std::string& message);

inline void log_info(const std::string& m) { log(LogLevel::Info, m); }
inline void log_warn(const std::string& m) { log(LogLevel::Warn, m); }
inline void log_error(const std::string& m) { log(LogLevel::Error, m); }

const char* log_level_name(LogLevel level);

} // namespace flowgate
