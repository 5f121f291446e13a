#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "mpx/harness/probe.hpp"

namespace mpx {

using InspectProvider = std::function<std::string()>;

/// Named value providers for one rank, looked up by the debug agent.
class InspectableRegistry {
 public:
  struct Entry {
    ThreadIndex owner = 0;
    InspectProvider provider;
  };

  /// Throws argument error when `name` is already registered.
  void add(const std::string& name, ThreadIndex owner, InspectProvider provider);
  std::optional<Entry> find(const std::string& name) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, Entry> entries_;
};

}  // namespace mpx
