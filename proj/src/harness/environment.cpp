#include "mpx/harness/environment.hpp"

#include <cstdlib>
#include <optional>

#include "mpx/error.hpp"
#include "mpx/text.hpp"

extern char** environ;

namespace mpx {

std::string_view to_string(Mode mode) { return mode == Mode::multicore ? "multicore" : "cluster"; }

Mode parse_mode(std::string_view text) {
  if (text == "multicore") return Mode::multicore;
  if (text == "cluster") return Mode::cluster;
  fail(ErrorKind::config, "unknown mode '" + std::string(text) + "'");
}

namespace {

std::optional<std::string> lookup(const std::map<std::string, std::string>& vars, const char* key) {
  auto it = vars.find(key);
  if (it == vars.end()) return std::nullopt;
  return it->second;
}

int require_int(const std::map<std::string, std::string>& vars, const char* key, int min) {
  auto raw = lookup(vars, key);
  if (!raw) fail(ErrorKind::config, std::string(key) + " is not set");
  auto v = text::parse_int(*raw);
  if (!v || *v < min || *v > 1'000'000) {
    fail(ErrorKind::config, std::string(key) + " has invalid value '" + *raw + "'");
  }
  return static_cast<int>(*v);
}

}  // namespace

Environment Environment::from_variables(const std::map<std::string, std::string>& vars) {
  Environment env;
  env.size = require_int(vars, "MPX_SIZE", 1);
  auto mode = lookup(vars, "MPX_MODE");
  if (!mode) fail(ErrorKind::config, "MPX_MODE is not set");
  env.mode = parse_mode(*mode);
  if (env.mode == Mode::cluster || lookup(vars, "MPX_RANK")) {
    env.rank = require_int(vars, "MPX_RANK", 0);
  }
  if (env.rank >= env.size) {
    fail(ErrorKind::config, "MPX_RANK " + std::to_string(env.rank) + " >= MPX_SIZE " +
                                std::to_string(env.size));
  }
  if (auto conf = lookup(vars, "MPX_CONF")) env.conf_path = *conf;
  if (env.mode == Mode::cluster && env.conf_path.empty()) {
    fail(ErrorKind::config, "MPX_CONF is required in cluster mode");
  }
  if (lookup(vars, "MPX_CONNECT_TIMEOUT_S")) {
    env.connect_timeout = std::chrono::seconds(require_int(vars, "MPX_CONNECT_TIMEOUT_S", 1));
  }
  return env;
}

Environment Environment::from_process_env() {
  std::map<std::string, std::string> vars;
  for (char** e = environ; *e != nullptr; ++e) {
    std::string_view entry(*e);
    if (entry.substr(0, 4) != "MPX_") continue;
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    vars.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  return from_variables(vars);
}

std::string getenv_or(const char* name, std::string_view fallback) {
  const char* v = std::getenv(name);
  return v != nullptr ? std::string(v) : std::string(fallback);
}

}  // namespace mpx
