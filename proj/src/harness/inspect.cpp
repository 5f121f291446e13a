#include "mpx/harness/inspect.hpp"

#include "mpx/error.hpp"

namespace mpx {

void InspectableRegistry::add(const std::string& name, ThreadIndex owner, InspectProvider provider) {
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(name, Entry{owner, std::move(provider)}).second) {
    fail(ErrorKind::argument, "inspectable '" + name + "' already registered");
  }
}

std::optional<InspectableRegistry::Entry> InspectableRegistry::find(const std::string& name) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(name);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

}  // namespace mpx
