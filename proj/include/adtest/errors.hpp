#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adtest {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpecSyntaxError : public Error {
 public:
  SpecSyntaxError(std::string message, int line, int column,
                  std::vector<std::string> expected = {})
      : Error(format(message, line, column, expected)),
        line_(line),
        column_(column),
        expected_(std::move(expected)) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string format(const std::string& message, int line, int column,
                            const std::vector<std::string>& expected) {
    std::string out = std::to_string(line) + ":" + std::to_string(column) +
                      ": " + message;
    if (!expected.empty()) {
      out += " (expected one of:";
      for (const auto& e : expected) out += " " + e;
      out += ")";
    }
    return out;
  }

  int line_;
  int column_;
  std::vector<std::string> expected_;
};

class GpError : public Error {
 public:
  using Error::Error;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

// Failure talking to an external simulator process.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& message, long request_id = -1)
      : Error(request_id >= 0
                  ? "request " + std::to_string(request_id) + ": " + message
                  : message),
        request_id_(request_id) {}

  long request_id() const noexcept { return request_id_; }

 private:
  long request_id_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace adtest
