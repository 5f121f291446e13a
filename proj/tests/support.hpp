#pragma once

#include <stdlib.h>

#include <algorithm>
#include <stdexcept>

#include <chrono>
#include <filesystem>
#include <future>
#include <sstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mpx/fileio.hpp"
#include "mpx/net.hpp"
#include "mpx/process.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Directory under /tmp removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "mpx-test-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string bin(const std::string& tool) { return std::string(MPX_BIN_DIR) + "/" + tool; }

inline mpx::process::Captured run_tool(std::vector<std::string> argv, const fs::path& cwd = {},
                                       std::chrono::seconds timeout = std::chrono::seconds(60),
                                       mpx::process::EnvList env = {}) {
  mpx::process::SpawnSpec spec;
  spec.argv = std::move(argv);
  spec.cwd = cwd.string();
  spec.env = std::move(env);
  return mpx::process::run_capture(spec, timeout);
}

/// Sorted names of the regular files in `dir`.
inline std::vector<std::string> file_names(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// A base port with `count` consecutive free ports, searched from `start`.
inline int free_port_block(int start, int count) {
  for (int base = start; base + count < 65000; base += count + 7) {
    bool ok = true;
    for (int p = base; p < base + count && ok; ++p) ok = mpx::net::port_is_free("0.0.0.0", static_cast<std::uint16_t>(p));
    if (ok) return base;
  }
  throw std::runtime_error("no free port block");
}

template <typename Pred>
bool eventually(Pred&& pred, std::chrono::milliseconds timeout = std::chrono::milliseconds(10000)) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return pred();
}

struct DebugRun {
  mpx::process::Captured launcher;
  mpx::process::Captured client;
};

/// Starts mpx-demo under `mpxrun -debug -suspend` in cluster mode on `nodes`
/// loopback machine entries, then drives it with `mpxdbg --script`.
inline DebugRun run_debug_demo(const TempDir& dir, int np, int nodes, int base_port, const std::string& script,
                               std::vector<std::string> demo_args = {}) {
  std::string machines;
  for (int i = 0; i < nodes; ++i) machines += "127.0.0.1\n";
  mpx::write_file_atomic(dir / "machines", machines);
  mpx::write_file_atomic(dir / "script", script);
  std::vector<std::string> launch = {bin("mpxrun"), "-np", std::to_string(np), "-dev", "cluster",
                                     "-machines", (dir / "machines").string(), "-debug", std::to_string(base_port),
                                     "-suspend", "-conf", (dir / "mpjdev.conf").string(), "-portbase",
                                     std::to_string(base_port), "--", bin("mpx-demo")};
  launch.insert(launch.end(), demo_args.begin(), demo_args.end());
  auto launcher = std::async(std::launch::async, [launch, &dir] { return run_tool(launch, dir.path()); });
  eventually([&] { return fs::exists(dir / "mpjdev.conf"); });
  DebugRun out;
  out.client = run_tool({bin("mpxdbg"), "--conf", (dir / "mpjdev.conf").string(), "--script",
                         (dir / "script").string(), "--timeout", "20"},
                        dir.path());
  out.launcher = launcher.get();
  return out;
}

/// Lines of `text` that contain `needle`.
inline std::vector<std::string> grep_lines(const std::string& text, const std::string& needle) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.find(needle) != std::string::npos) out.push_back(line);
  }
  return out;
}

}  // namespace testing
