#pragma once

#include <stdexcept>
#include <string>

namespace flowcept {

enum class ErrorKind {
  parse,       // malformed input file or string
  constraint,  // invariant violation in user-supplied data (duplicates, empty rows)
  not_found,   // unknown flow / matchfield / query / concept
  state,       // operation not valid in the current session state
  io,          // filesystem problems
  verify,      // a verification check failed
  internal,    // broken internal invariant; indicates a bug
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

}  // namespace flowcept
