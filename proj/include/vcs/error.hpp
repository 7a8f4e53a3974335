#pragma once

#include <stdexcept>
#include <string>

namespace vcs {

// Error categories map 1:1 onto CLI exit codes: usage -> 2, validation -> 3,
// runtime -> 1.
enum class ErrorKind {
    usage,
    validation,
    runtime,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    const char* category() const {
        switch (kind_) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::validation: return "validation";
        case ErrorKind::runtime: return "runtime";
        }
        return "runtime";
    }

    static Error usage(const std::string& msg) { return Error(ErrorKind::usage, msg); }
    static Error validation(const std::string& msg) { return Error(ErrorKind::validation, msg); }
    static Error runtime(const std::string& msg) { return Error(ErrorKind::runtime, msg); }

private:
    ErrorKind kind_;
};

}  // namespace vcs
