#include "mpx/fileio.hpp"

#include <fstream>
#include <sstream>

#include "mpx/error.hpp"

namespace mpx {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".partial";
  std::error_code ec;
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) {
      out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
      out.flush();
    }
    if (!out) {
      std::filesystem::remove(tmp, ec);
      fail(ErrorKind::io, "cannot write " + path.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::io, "cannot write " + path.string());
  }
}

}  // namespace mpx
