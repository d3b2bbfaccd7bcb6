#pragma once

#include <stdexcept>
#include <string>

namespace bimodal {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 2, InputError -> 3, NumericError -> 4, DescriptorMismatch -> 5.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DescriptorMismatch : std::runtime_error {
    explicit DescriptorMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bimodal
