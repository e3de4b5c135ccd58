#include "countycast/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace countycast::log {

namespace {

Level parse_env() {
    const char* env = std::getenv("COUNTYCAST_LOG");
    if (env == nullptr) return Level::kInfo;
    std::string v(env);
    if (v == "debug") return Level::kDebug;
    if (v == "info") return Level::kInfo;
    if (v == "warn") return Level::kWarn;
    if (v == "error") return Level::kError;
    return Level::kInfo;
}

Level& threshold_ref() {
    static Level level = parse_env();
    return level;
}

const char* tag(Level level) {
    switch (level) {
        case Level::kDebug: return "debug";
        case Level::kInfo: return "info";
        case Level::kWarn: return "warn";
        case Level::kError: return "error";
    }
    return "?";
}

std::mutex& io_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

Level threshold() { return threshold_ref(); }

void set_threshold(Level level) { threshold_ref() = level; }

void write(Level level, const std::string& message) {
    std::lock_guard<std::mutex> lock(io_mutex());
    std::cerr << "[countycast " << tag(level) << "] " << message << "\n";
}

} // namespace countycast::log
