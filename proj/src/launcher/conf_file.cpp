#include "mpx/launcher/conf_file.hpp"

#include "mpx/error.hpp"
#include "mpx/fileio.hpp"
#include "mpx/text.hpp"

namespace mpx::launcher {

std::string ConfFile::encode() const {
  std::string out;
  for (const auto& r : records) {
    out += r.address;
    out += ' ';
    out += std::to_string(r.rank);
    out += ' ';
    out += std::to_string(r.port);
    out += '\n';
  }
  return out;
}

ConfFile ConfFile::parse(std::string_view text) {
  ConfFile conf;
  if (text.empty()) return conf;
  if (text.back() == '\n') text.remove_suffix(1);
  int line_no = 0;
  for (auto line : text::split(text, '\n')) {
    ++line_no;
    auto where = "mpjdev.conf line " + std::to_string(line_no);
    auto fields = text::split(line, ' ');
    if (fields.size() != 3 || fields[0].empty()) {
      fail(ErrorKind::parse, where + ": expected '<address> <rank> <port>'");
    }
    auto rank = text::parse_int(fields[1]);
    auto port = text::parse_int(fields[2]);
    if (!rank || *rank < 0) fail(ErrorKind::parse, where + ": bad rank");
    if (!port || *port < 1 || *port > 65535) fail(ErrorKind::parse, where + ": bad port");
    if (*rank != static_cast<std::int64_t>(conf.records.size())) {
      fail(ErrorKind::parse, where + ": expected rank " + std::to_string(conf.records.size()));
    }
    conf.records.push_back(
        {std::string(fields[0]), static_cast<int>(*rank), static_cast<std::uint16_t>(*port)});
  }
  return conf;
}

ConfFile ConfFile::read(const std::filesystem::path& path) { return parse(read_file(path)); }

void ConfFile::write(const std::filesystem::path& path) const { write_file_atomic(path, encode()); }

const ConfRecord& ConfFile::for_rank(int rank) const {
  if (rank < 0 || rank >= size()) {
    fail(ErrorKind::config, "rank " + std::to_string(rank) + " not in mpjdev.conf");
  }
  return records[static_cast<size_t>(rank)];
}

}  // namespace mpx::launcher
