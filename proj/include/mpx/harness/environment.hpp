#pragma once

#include <chrono>
#include <map>
#include <string>
#include <string_view>

namespace mpx {

enum class Mode { multicore, cluster };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);  // throws config error

/// Rank bootstrap parameters, normally read from MPX_* variables.
struct Environment {
  int rank = 0;
  int size = 1;
  Mode mode = Mode::multicore;
  std::string conf_path;
  std::chrono::seconds connect_timeout{30};

  /// Throws config error for missing or malformed variables. MPX_RANK may be
  /// omitted in multicore mode (the process hosts every rank).
  static Environment from_variables(const std::map<std::string, std::string>& vars);
  static Environment from_process_env();
};

/// Reads one variable from the process environment.
std::string getenv_or(const char* name, std::string_view fallback = {});

}  // namespace mpx
