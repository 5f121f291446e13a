#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mpx::launcher {

struct ConfRecord {
  std::string address;
  int rank = 0;
  std::uint16_t port = 0;

  friend bool operator==(const ConfRecord&, const ConfRecord&) = default;
};

/// In-memory form of `mpjdev.conf`: one record per rank, in rank order.
///
/// Text encoding is one `<address> <rank> <port>` line per record, single
/// spaces, LF after every line, nothing else.
struct ConfFile {
  std::vector<ConfRecord> records;

  std::string encode() const;
  /// Throws parse error naming the line. Requires ranks 0..n-1 exactly once
  /// and in order.
  static ConfFile parse(std::string_view text);
  static ConfFile read(const std::filesystem::path& path);
  /// Throws io error. Writes to a temporary and renames, so readers never
  /// observe a partial file.
  void write(const std::filesystem::path& path) const;

  int size() const { return static_cast<int>(records.size()); }
  const ConfRecord& for_rank(int rank) const;

  friend bool operator==(const ConfFile&, const ConfFile&) = default;
};

}  // namespace mpx::launcher
