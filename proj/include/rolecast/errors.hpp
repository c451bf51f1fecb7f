// SPDX-License-Identifier: Apache-2.0
//
// Error hierarchy. Every failure carries the process exit code the CLI
// maps it to: 2 invalid input, 3 training/numerical failure, 4 I/O or
// digest failure.
#pragma once

#include <stdexcept>
#include <string>

namespace rolecast {

class Error : public std::runtime_error {
public:
    Error(int exit_code, const std::string& what)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& w) : Error(2, w) {}
};

// Duplicate role name or conflicting block assignment.
struct ConflictError : InvalidArgument {
    explicit ConflictError(const std::string& w) : InvalidArgument(w) {}
};

// Routing requested against an empty registry.
struct NoRolesError : InvalidArgument {
    explicit NoRolesError(const std::string& w) : InvalidArgument(w) {}
};

// Operation requires state that does not exist yet (e.g. fusing with no
// trained blocks).
struct UnsupportedError : InvalidArgument {
    explicit UnsupportedError(const std::string& w) : InvalidArgument(w) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& w) : Error(3, w) {}
};

// The finite-difference oracle hit a non-finite evaluation.
struct OracleFailure : Error {
    explicit OracleFailure(const std::string& w) : Error(3, w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(4, w) {}
};

}  // namespace rolecast
