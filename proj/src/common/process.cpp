#include "mpx/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string_view>

#include "mpx/error.hpp"

namespace mpx::process {

std::string ExitStatus::describe() const {
  if (kind == Kind::exited) return "exited with code " + std::to_string(value);
  return "terminated by signal " + std::to_string(value) + " (" + ::strsignal(value) + ")";
}

namespace {

ExitStatus decode(int status) {
  if (WIFSIGNALED(status)) return {ExitStatus::Kind::signaled, WTERMSIG(status)};
  return {ExitStatus::Kind::exited, WEXITSTATUS(status)};
}

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

}  // namespace

Child::~Child() {
  close_fd(out_fd_);
  close_fd(err_fd_);
  if (pid_ > 0 && !status_) {
    ::kill(pid_, SIGKILL);
    int st = 0;
    ::waitpid(pid_, &st, 0);
  }
}

Child::Child(Child&& other) noexcept
    : pid_(other.pid_), out_fd_(other.out_fd_), err_fd_(other.err_fd_), status_(other.status_) {
  other.pid_ = -1;
  other.out_fd_ = -1;
  other.err_fd_ = -1;
}

Child& Child::operator=(Child&& other) noexcept {
  if (this != &other) {
    this->~Child();
    new (this) Child(std::move(other));
  }
  return *this;
}

int Child::take_stdout() { return std::exchange(out_fd_, -1); }
int Child::take_stderr() { return std::exchange(err_fd_, -1); }

ExitStatus Child::wait() {
  if (status_) return *status_;
  int st = 0;
  while (::waitpid(pid_, &st, 0) < 0) {
    if (errno != EINTR) fail(ErrorKind::launch, "waitpid failed: " + std::string(std::strerror(errno)));
  }
  status_ = decode(st);
  return *status_;
}

std::optional<ExitStatus> Child::try_wait() {
  if (status_) return status_;
  int st = 0;
  pid_t r = ::waitpid(pid_, &st, WNOHANG);
  if (r == pid_) status_ = decode(st);
  return status_;
}

void Child::kill(int sig) {
  if (pid_ > 0 && !status_) ::kill(pid_, sig);
}

Child spawn(const SpawnSpec& spec) {
  if (spec.argv.empty()) fail(ErrorKind::launch, "empty command");
  int out_pipe[2] = {-1, -1};
  int err_pipe[2] = {-1, -1};
  int exec_pipe[2] = {-1, -1};
  if (spec.capture) {
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0) {
      fail(ErrorKind::launch, "pipe failed: " + std::string(std::strerror(errno)));
    }
  }
  if (::pipe2(exec_pipe, O_CLOEXEC) != 0) {
    fail(ErrorKind::launch, "pipe failed: " + std::string(std::strerror(errno)));
  }

  // Prepare everything the child needs before fork; the child only calls
  // async-signal-safe functions.
  std::vector<char*> args;
  for (const auto& a : spec.argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  std::vector<std::string> env_strings;
  for (char** e = environ; *e != nullptr; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    std::string_view key = entry.substr(0, eq);
    bool overridden = false;
    for (const auto& kv : spec.env) overridden = overridden || kv.first == key;
    if (!overridden) env_strings.emplace_back(entry);
  }
  for (const auto& [k, v] : spec.env) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& e : env_strings) envp.push_back(e.data());
  envp.push_back(nullptr);

  pid_t parent = ::getpid();
  pid_t pid = ::fork();
  if (pid < 0) fail(ErrorKind::launch, "fork failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    if (spec.die_with_parent) {
      ::prctl(PR_SET_PDEATHSIG, SIGKILL);
      if (::getppid() != parent) ::_exit(127);
    }
    if (spec.capture) {
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::dup2(err_pipe[1], STDERR_FILENO);
    }
    if (!spec.cwd.empty() && ::chdir(spec.cwd.c_str()) != 0) {
      int err = errno;
      [[maybe_unused]] auto n = ::write(exec_pipe[1], &err, sizeof(err));
      ::_exit(127);
    }
    ::execvpe(args[0], args.data(), envp.data());
    int err = errno;
    [[maybe_unused]] auto n = ::write(exec_pipe[1], &err, sizeof(err));
    ::_exit(127);
  }

  ::close(exec_pipe[1]);
  int child_errno = 0;
  ssize_t n;
  do {
    n = ::read(exec_pipe[0], &child_errno, sizeof(child_errno));
  } while (n < 0 && errno == EINTR);
  ::close(exec_pipe[0]);
  if (spec.capture) {
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
  }
  Child child(pid, spec.capture ? out_pipe[0] : -1, spec.capture ? err_pipe[0] : -1);
  if (n > 0) {
    child.wait();
    fail(ErrorKind::launch,
         "cannot execute " + spec.argv[0] + ": " + std::string(std::strerror(child_errno)));
  }
  return child;
}

Captured run_capture(const SpawnSpec& spec, std::chrono::milliseconds timeout) {
  SpawnSpec s = spec;
  s.capture = true;
  Child child = spawn(s);
  int fds[2] = {child.take_stdout(), child.take_stderr()};
  Captured result;
  std::string* sinks[2] = {&result.out, &result.err};
  auto deadline = std::chrono::steady_clock::now() + timeout;
  int open = 2;
  while (open > 0) {
    pollfd pfds[2];
    int count = 0;
    int map[2];
    for (int i = 0; i < 2; ++i) {
      if (fds[i] >= 0) {
        pfds[count] = {fds[i], POLLIN, 0};
        map[count++] = i;
      }
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      child.kill(SIGKILL);
      break;
    }
    int r = ::poll(pfds, static_cast<nfds_t>(count), static_cast<int>(remaining.count()));
    if (r < 0 && errno == EINTR) continue;
    for (int j = 0; j < count; ++j) {
      if (pfds[j].revents == 0) continue;
      char buf[4096];
      ssize_t got = ::read(pfds[j].fd, buf, sizeof(buf));
      if (got > 0) {
        sinks[map[j]]->append(buf, static_cast<size_t>(got));
      } else if (got == 0 || errno != EINTR) {
        ::close(fds[map[j]]);
        fds[map[j]] = -1;
        --open;
      }
    }
  }
  for (int& fd : fds) close_fd(fd);
  result.status = child.wait();
  return result;
}

}  // namespace mpx::process
