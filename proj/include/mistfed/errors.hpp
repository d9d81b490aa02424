#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mistfed {

/// Base of all library errors. `category()` is a stable machine-readable tag
/// ("config", "usage", "data", "numeric", "protocol", "ingestion") that the
/// CLI maps to exit codes.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error("usage", msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error("data", msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error("numeric", msg) {}
};

struct ProtocolError : Error {
    explicit ProtocolError(const std::string& msg) : Error("protocol", msg) {}
};

struct IngestionError : Error {
    explicit IngestionError(const std::string& msg) : Error("ingestion", msg) {}
};

}  // namespace mistfed
