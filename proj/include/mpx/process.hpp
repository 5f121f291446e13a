#pragma once

#include <sys/types.h>

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mpx::process {

struct ExitStatus {
  enum class Kind { exited, signaled };
  Kind kind = Kind::exited;
  int value = 0;  // exit code or signal number

  bool success() const { return kind == Kind::exited && value == 0; }
  /// Shell-style code: exit code, or 128+signal.
  int shell_code() const { return kind == Kind::exited ? value : 128 + value; }
  std::string describe() const;
  friend bool operator==(const ExitStatus&, const ExitStatus&) = default;
};

using EnvList = std::vector<std::pair<std::string, std::string>>;

struct SpawnSpec {
  std::vector<std::string> argv;
  EnvList env;  // added to (and overriding) the parent's environment
  std::string cwd;
  bool capture = true;  // pipe stdout/stderr; otherwise inherit
  bool die_with_parent = false;  // SIGKILL the child when the spawning thread exits
};

/// A spawned child. Owns its pipe read ends.
class Child {
 public:
  Child() = default;
  Child(pid_t pid, int out_fd, int err_fd) : pid_(pid), out_fd_(out_fd), err_fd_(err_fd) {}
  ~Child();
  Child(Child&& other) noexcept;
  Child& operator=(Child&& other) noexcept;
  Child(const Child&) = delete;
  Child& operator=(const Child&) = delete;

  pid_t pid() const { return pid_; }
  /// Read ends; ownership moves to the caller.
  int take_stdout();
  int take_stderr();
  ExitStatus wait();
  std::optional<ExitStatus> try_wait();
  void kill(int sig);

 private:
  pid_t pid_ = -1;
  int out_fd_ = -1;
  int err_fd_ = -1;
  std::optional<ExitStatus> status_;
};

/// Throws launch error if the program cannot be executed.
Child spawn(const SpawnSpec& spec);

struct Captured {
  ExitStatus status;
  std::string out;
  std::string err;
  bool timed_out = false;
};

/// Spawns, collects both streams, waits. Kills the child on timeout.
Captured run_capture(const SpawnSpec& spec, std::chrono::milliseconds timeout);

}  // namespace mpx::process
