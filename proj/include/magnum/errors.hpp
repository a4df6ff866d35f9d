#pragma once

#include <stdexcept>
#include <string>

namespace magnum {

// Error taxonomy used across the library. Everything derives from
// std::runtime_error so callers can catch broadly or by kind.

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error("dimension error: " + msg) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error("domain error: " + msg) {}
};

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

// File-format violations carry the byte offset of the offending field.
struct FormatError : std::runtime_error {
    std::size_t offset;
    FormatError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error("format error at byte " + std::to_string(byte_offset) + ": " + msg),
          offset(byte_offset) {}
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error("schema error: " + msg) {}
};

struct LabelError : std::runtime_error {
    explicit LabelError(const std::string& msg) : std::runtime_error("label error: " + msg) {}
};

struct StratificationError : std::runtime_error {
    explicit StratificationError(const std::string& msg)
        : std::runtime_error("stratification error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

}  // namespace magnum
