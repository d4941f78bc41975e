#pragma once

#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

namespace restore {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Error raised while reading a scenario or plan document. Carries the
/// location (file key / line) of the offending field when known.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Error raised when a well-formed document violates a structural invariant
/// (negative resistance, profile length mismatch, ...). Names the element.
class InvariantError : public std::runtime_error {
public:
    explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

/// Error raised by model assembly or solver plumbing.
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Log levels: 0 silent, 1 info, 2 debug. Controlled by RESTORE_LOG.
inline int log_level() {
    static int level = [] {
        const char* env = std::getenv("RESTORE_LOG");
        return env ? std::atoi(env) : 0;
    }();
    return level;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
    if (log_level() >= 1) {
        std::fprintf(stderr, "[restore] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
    if (log_level() >= 2) {
        std::fprintf(stderr, "[restore] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

} // namespace restore
