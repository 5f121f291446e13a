#include "mpx/launcher/placement.hpp"

#include <map>
#include <set>

#include "mpx/error.hpp"

namespace mpx::launcher {

std::uint16_t PlacementEntry::effective_port() const {
  return static_cast<std::uint16_t>(debug_port + host_slot_port_offset * host_slot);
}

ConfFile Placement::to_conf() const {
  ConfFile conf;
  for (const auto& e : entries) conf.records.push_back({e.node_address, e.rank, e.effective_port()});
  return conf;
}

Placement assign_ranks(const std::vector<std::string>& machines, int np) {
  if (machines.empty()) fail(ErrorKind::config, "machine list is empty");
  if (np < 1) fail(ErrorKind::config, "np must be >= 1");
  const int m = static_cast<int>(machines.size());
  const int per_node = (np + m - 1) / m;

  std::vector<int> host_slot(machines.size());
  std::map<std::string, int> seen;
  for (size_t i = 0; i < machines.size(); ++i) host_slot[i] = seen[machines[i]]++;

  Placement p;
  for (int rank = 0; rank < np; ++rank) {
    int node = rank / per_node;
    p.entries.push_back({rank, node, machines[static_cast<size_t>(node)], rank % per_node,
                         host_slot[static_cast<size_t>(node)], 0});
  }
  return p;
}

std::uint16_t compute_debug_port(int base, int local_index) {
  if (base < 1 || local_index < 0) fail(ErrorKind::config, "invalid debug port base or index");
  long port = static_cast<long>(base) + 2L * local_index;
  if (port > 65535) {
    fail(ErrorKind::config, "debug port " + std::to_string(port) + " exceeds 65535 (base " +
                                std::to_string(base) + ", index " + std::to_string(local_index) + ")");
  }
  return static_cast<std::uint16_t>(port);
}

void assign_ports(Placement& placement, int base) {
  std::map<std::string, std::set<int>> used;
  for (auto& e : placement.entries) {
    e.debug_port = compute_debug_port(base, e.local_index);
    long effective = static_cast<long>(e.debug_port) + host_slot_port_offset * e.host_slot;
    // The odd neighbour (effective + 1) is the rank's data port.
    if (effective + 1 > 65535) {
      fail(ErrorKind::config, "port for rank " + std::to_string(e.rank) + " exceeds 65535");
    }
    auto& ports = used[e.node_address];
    if (!ports.insert(static_cast<int>(effective)).second) {
      fail(ErrorKind::config, "port " + std::to_string(effective) + " on " + e.node_address +
                                  " assigned twice (too many ranks per repeated host entry)");
    }
  }
}

ConfFile write_conf(const Placement& placement, const std::filesystem::path& path) {
  for (const auto& e : placement.entries) {
    if (e.debug_port == 0) fail(ErrorKind::config, "placement has unset ports");
  }
  placement.to_conf().write(path);
  return ConfFile::read(path);
}

}  // namespace mpx::launcher
