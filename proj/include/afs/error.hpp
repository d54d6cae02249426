#pragma once

#include <stdexcept>
#include <string>

namespace afs {

/// Failure categories; they map 1:1 onto CLI exit codes.
enum class ErrorCode {
    usage = 1,    // bad flags, bad config keys, invalid arguments
    data = 2,     // malformed files, shape mismatches, missing artifacts
    numeric = 3,  // divergence, degenerate selections, undefined ratios
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorCode::usage, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorCode::data, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorCode::numeric, msg); }

}  // namespace afs
