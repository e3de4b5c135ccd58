#pragma once

#include <sstream>
#include <string>

namespace countycast::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

// Threshold comes from COUNTYCAST_LOG (debug|info|warn|error); default info.
Level threshold();
void set_threshold(Level level);

void write(Level level, const std::string& message);

namespace detail {
template <typename... Args>
std::string concat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}
} // namespace detail

template <typename... Args>
void debug(Args&&... args) {
    if (threshold() <= Level::kDebug) write(Level::kDebug, detail::concat(args...));
}
template <typename... Args>
void info(Args&&... args) {
    if (threshold() <= Level::kInfo) write(Level::kInfo, detail::concat(args...));
}
template <typename... Args>
void warn(Args&&... args) {
    if (threshold() <= Level::kWarn) write(Level::kWarn, detail::concat(args...));
}
template <typename... Args>
void error(Args&&... args) {
    if (threshold() <= Level::kError) write(Level::kError, detail::concat(args...));
}

} // namespace countycast::log
