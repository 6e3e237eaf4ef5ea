#pragma once

#include <stdexcept>
#include <string>

namespace fal {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

struct ShapeMismatchError : std::invalid_argument {
    explicit ShapeMismatchError(const std::string& msg)
        : std::invalid_argument("shape mismatch: " + msg) {}
};

struct NonConvergenceError : std::runtime_error {
    explicit NonConvergenceError(const std::string& msg)
        : std::runtime_error("did not converge: " + msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace fal
