#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpx/launcher/conf_file.hpp"

namespace mpx::launcher {

/// Nodes that share an address on one host are separated by this many ports
/// per repeated entry.
inline constexpr int host_slot_port_offset = 100;

struct PlacementEntry {
  int rank = 0;
  int node_index = 0;        // position in the machines list
  std::string node_address;
  int local_index = 0;       // position of the rank on its node
  int host_slot = 0;         // earlier machine entries with the same address
  std::uint16_t debug_port = 0;  // nominal port from the stride-2 formula; 0 = unset

  /// Port actually used on the host, after the per-host-slot offset.
  std::uint16_t effective_port() const;

  friend bool operator==(const PlacementEntry&, const PlacementEntry&) = default;
};

struct Placement {
  std::vector<PlacementEntry> entries;  // rank order

  ConfFile to_conf() const;
  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Block distribution: node i receives ranks starting at i·ceil(np/m), in
/// order, so earlier nodes fill first. Ports are left unset.
Placement assign_ranks(const std::vector<std::string>& machines, int np);

/// base + 2·local_index; throws config error past 65535.
std::uint16_t compute_debug_port(int base, int local_index);

/// Fills nominal ports from `base` and checks that effective ports are
/// distinct per address. Throws config error on overflow or collision.
void assign_ports(Placement& placement, int base);

/// Writes the conf file for `placement` and returns it parsed back from disk.
ConfFile write_conf(const Placement& placement, const std::filesystem::path& path);

}  // namespace mpx::launcher
