#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sentifuse {

// Malformed or inconsistent input data (corpus rows, stores, configs).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what, std::size_t row = 0)
        : std::runtime_error(row ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}

    // 1-based data row, 0 when not row-specific.
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

// Failure talking to or replaying a classifier backend. Not retried.
class BackendError : public std::runtime_error {
public:
    BackendError(std::string backend_id, const std::string& what)
        : std::runtime_error(backend_id + ": " + what), backend_id_(std::move(backend_id)) {}

    const std::string& backend_id() const noexcept { return backend_id_; }

private:
    std::string backend_id_;
};

// Network-level failure or 5xx reply; retried with backoff.
class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

// Throttled (HTTP 429 and similar); retried with backoff.
class RateLimitError : public TransportError {
public:
    using TransportError::TransportError;
};

// Hard quota exhaustion; retrying cannot help.
class QuotaError : public BackendError {
public:
    using BackendError::BackendError;
};

}  // namespace sentifuse
