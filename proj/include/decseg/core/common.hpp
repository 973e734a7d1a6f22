#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace decseg {

using i64 = std::int64_t;

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

// Check macro with a streamable message:
//   DECSEG_CHECK(h % 2 == 0, "expected even height, got " << h);
// Throws std::runtime_error; these are contract violations callers can catch.
#define DECSEG_CHECK(cond, msg)                \
  do {                                         \
    if (!(cond)) {                             \
      std::ostringstream oss_;                 \
      oss_ << msg;                             \
      ::decseg::fail(oss_.str());              \
    }                                          \
  } while (0)

}  // namespace decseg
