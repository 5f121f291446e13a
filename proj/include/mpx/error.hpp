#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpx {

enum class ErrorKind {
  config,
  argument,
  state,
  transport,
  connect,
  io,
  usage,
  launch,
  protocol,
  attach,
  parse,
  report,
  gateway,
  timeout,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the toolkit; `kind()` distinguishes the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace mpx
