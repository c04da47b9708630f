#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selfgoal {

// Lookup of an id/label that does not exist.
struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed structured text (tree documents, model replies the caller
// required to be parseable, config files).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what, std::size_t position = 0)
        : std::runtime_error(what), position(position) {}
    std::size_t position = 0;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backend failures.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Transport-level failure after retries were exhausted.
struct BackendUnavailable : BackendError {
    using BackendError::BackendError;
};

// A scripted backend had no reply for a tag. This is a test/script bug and
// must fail loudly rather than degrade.
struct ScriptExhausted : BackendError {
    using BackendError::BackendError;
};

// The remote endpoint answered with a non-2xx status.
struct RemoteRejected : BackendError {
    RemoteRejected(int status, std::string body)
        : BackendError("remote endpoint rejected request (status " +
                       std::to_string(status) + ")"),
          status(status),
          body(std::move(body)) {}
    int status = 0;
    std::string body;
};

}  // namespace selfgoal
