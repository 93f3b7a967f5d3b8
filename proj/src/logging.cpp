#include "flowgate/logging.hpp"

#include <iostream>
#include <mutex>

namespace flowgate {

namespace {

std::mutex g_log_mutex;
LogSink g_sink; // empty = stderr default

} // namespace

const char* log_level_name(LogLevel level) {
    switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    }
    return "?";
}

void set_log_sink(LogSink sink) {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    g_sink = std::move(sink);
}

void log(LogLevel level, const std::string& message) {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    if (g_sink) {
        g_sink(level, message);
    } else {
        std::cerr << "[" << log_level_name(level) << "] " << message << "\n";
    }
}

} // namespace flowgate
