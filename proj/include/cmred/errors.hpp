#pragma once

#include <stdexcept>
#include <string>

namespace cmred {

// Exit-code mapping used by the CLI: config 1, root finding 2, fixed point 3,
// verdict disagreement 4.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RootFindingError : std::runtime_error {
    explicit RootFindingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FixedPointError : std::runtime_error {
    explicit FixedPointError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cmred
