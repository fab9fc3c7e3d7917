#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace angcn {

// Precondition violations are reported as std::invalid_argument throughout the
// library. ParseError additionally carries the offending line (1-based, 0 when
// the error is not tied to a line).
class ParseError : public std::invalid_argument {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::invalid_argument(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

} // namespace angcn
