#include "mpx/error.hpp"

namespace mpx {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config error";
    case ErrorKind::argument: return "argument error";
    case ErrorKind::state: return "state error";
    case ErrorKind::transport: return "transport error";
    case ErrorKind::connect: return "connect error";
    case ErrorKind::io: return "io error";
    case ErrorKind::usage: return "usage error";
    case ErrorKind::launch: return "launch error";
    case ErrorKind::protocol: return "protocol error";
    case ErrorKind::attach: return "attach error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::report: return "report error";
    case ErrorKind::gateway: return "gateway error";
    case ErrorKind::timeout: return "timeout";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace mpx
