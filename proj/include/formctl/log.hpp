#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace formctl {

// Verbosity from FORMCTL_LOG: off (default) | info | debug.
enum class LogLevel { Off = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("FORMCTL_LOG");
        if (!env) return LogLevel::Off;
        const std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        return LogLevel::Off;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << "\n";
}

}  // namespace formctl
