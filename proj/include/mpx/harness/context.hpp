#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpx/harness/environment.hpp"
#include "mpx/harness/inspect.hpp"

namespace mpx {

using Bytes = std::vector<std::byte>;
using Tag = std::int32_t;

/// Tag used internally by barrier(); rejected for user messages.
inline constexpr Tag reserved_tag = std::numeric_limits<Tag>::min();

/// Capacity of each (src, dest, tag) channel in multicore mode.
inline constexpr std::size_t default_channel_capacity = 1024;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(int dest, Tag tag, std::span<const std::byte> payload) = 0;
  virtual Bytes recv(int src, Tag tag) = 0;
  virtual void close() = 0;
};

class MulticoreFabric;

/// Per-rank communication endpoint. Owned and used by a single thread.
class CommContext {
 public:
  CommContext(int rank, int size, Mode mode, std::unique_ptr<Transport> transport);
  ~CommContext();
  CommContext(CommContext&&) noexcept;
  CommContext& operator=(CommContext&&) noexcept;

  int rank() const { return rank_; }
  int size() const { return size_; }
  Mode mode() const { return mode_; }
  bool finalized() const { return transport_ == nullptr; }

  /// Blocking; FIFO per (src, dest, tag). Self-send is allowed.
  void send(int dest, Tag tag, std::span<const std::byte> payload);
  void send(int dest, Tag tag, std::string_view payload);
  Bytes recv(int src, Tag tag);
  std::string recv_string(int src, Tag tag);
  /// Linear gather at rank 0, then release fan-out.
  void barrier();
  void finalize();

  /// The provider runs only while the registering thread is suspended in the
  /// debugger. Throws argument error on a duplicate name.
  void register_inspectable(const std::string& name, InspectProvider provider);
  const std::shared_ptr<InspectableRegistry>& inspectables() const { return inspectables_; }

 private:
  void require_open(const char* op) const;
  void check_peer(int peer, const char* what) const;

  int rank_;
  int size_;
  Mode mode_;
  std::unique_ptr<Transport> transport_;
  std::shared_ptr<InspectableRegistry> inspectables_;
};

/// In-process channel table shared by the ranks of one multicore run.
std::shared_ptr<MulticoreFabric> make_multicore_fabric(int size,
                                                       std::size_t capacity = default_channel_capacity);

/// Multicore: binds `env.rank` to `fabric` (created when null and size == 1).
/// Cluster: reads the conf file, listens on the rank's data port and connects
/// to peers lazily on first send.
CommContext init(const Environment& env, std::shared_ptr<MulticoreFabric> fabric = nullptr);

/// Data port for a rank whose conf record lists `conf_port`.
inline std::uint16_t data_port(std::uint16_t conf_port) {
  return static_cast<std::uint16_t>(conf_port + 1);
}

}  // namespace mpx
