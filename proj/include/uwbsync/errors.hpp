#pragma once

#include <stdexcept>
#include <string>

namespace uwbsync {

// Invalid configuration value. key() names the offending parameter.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& what)
        : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

// Input that violates an operation's precondition (range, length).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace uwbsync
