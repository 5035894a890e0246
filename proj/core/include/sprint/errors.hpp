#pragma once

#include <stdexcept>
#include <string>

namespace sprint {

// Failure classes map one-to-one onto CLI exit codes (usage=2 .. io=6).
enum class ErrorClass {
  usage = 2,    // invalid arguments or API preconditions
  parse = 3,    // malformed file contents
  align = 4,    // inputs that do not line up with each other
  numeric = 5,  // non-finite values, divergence
  io = 6,       // filesystem failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& message)
      : std::runtime_error(message), class_(cls) {}

  ErrorClass error_class() const { return class_; }
  int exit_code() const { return static_cast<int>(class_); }

 private:
  ErrorClass class_;
};

inline Error usage_error(const std::string& m) { return Error(ErrorClass::usage, m); }
inline Error parse_error(const std::string& m) { return Error(ErrorClass::parse, m); }
inline Error align_error(const std::string& m) { return Error(ErrorClass::align, m); }
inline Error numeric_error(const std::string& m) { return Error(ErrorClass::numeric, m); }
inline Error io_error(const std::string& m) { return Error(ErrorClass::io, m); }

}  // namespace sprint
