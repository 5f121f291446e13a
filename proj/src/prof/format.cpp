#include "mpx/prof/format.hpp"

#include <algorithm>

#include "mpx/error.hpp"
#include "mpx/text.hpp"

namespace mpx::prof {

std::string to_string(const ProfileIdentity& id) {
  return std::to_string(id.node) + "." + std::to_string(id.context) + "." + std::to_string(id.thread);
}

std::string profile_file_name(const ProfileIdentity& id) { return "profile." + to_string(id); }
std::string trace_file_name(const ProfileIdentity& id) { return "trace." + to_string(id); }

std::optional<ProfileIdentity> parse_file_name(std::string_view name, std::string_view prefix) {
  if (name.size() <= prefix.size() + 1 || name.substr(0, prefix.size()) != prefix ||
      name[prefix.size()] != '.') {
    return std::nullopt;
  }
  auto parts = text::split(name.substr(prefix.size() + 1), '.');
  if (parts.size() != 3) return std::nullopt;
  int values[3];
  for (int i = 0; i < 3; ++i) {
    auto p = parts[static_cast<size_t>(i)];
    // Plain decimal digits only; no sign.
    if (p.empty() || !std::all_of(p.begin(), p.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    auto v = text::parse_int(p);
    if (!v || *v > 0x7fffffff) return std::nullopt;
    values[i] = static_cast<int>(*v);
  }
  return ProfileIdentity{values[0], values[1], values[2]};
}

void sort_by_exclusive(std::vector<FunctionStats>& functions) {
  std::sort(functions.begin(), functions.end(), [](const FunctionStats& a, const FunctionStats& b) {
    if (a.excl_us != b.excl_us) return a.excl_us > b.excl_us;
    return a.name < b.name;
  });
}

std::string ProfileData::encode() const {
  std::string out = std::to_string(functions.size()) + " functions\n";
  for (const auto& f : functions) {
    out += text::quote(f.name);
    for (auto v : {f.calls, f.subrs, f.excl_us, f.incl_us}) {
      out += ' ';
      out += std::to_string(v);
    }
    out += '\n';
  }
  out += "0 aggregates\n";
  for (const auto& c : comments) {
    out += "# ";
    out += c;
    out += '\n';
  }
  return out;
}

ProfileData ProfileData::parse(std::string_view text, const std::string& source) {
  ProfileData data;
  std::vector<std::string_view> lines;
  if (!text.empty()) {
    if (text.back() == '\n') text.remove_suffix(1);
    lines = text::split(text, '\n');
  }
  auto error = [&](size_t line_no, const std::string& what) {
    fail(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": " + what);
  };
  size_t i = 0;
  if (lines.empty()) error(1, "missing '<n> functions' header");
  {
    auto fields = text::split(lines[0], ' ');
    auto count = fields.size() == 2 ? text::parse_int(fields[0]) : std::nullopt;
    if (!count || *count < 0 || fields[1] != "functions") error(1, "expected '<n> functions'");
    i = 1;
    for (std::int64_t k = 0; k < *count; ++k, ++i) {
      if (i >= lines.size()) error(i + 1, "truncated: expected function line");
      std::string_view rest = lines[i];
      auto name = text::unquote_prefix(rest);
      if (!name) error(i + 1, "expected quoted function name");
      auto nums = text::split(rest, ' ');
      // rest begins with the separator space, so the first field is empty.
      if (nums.size() != 5 || !nums[0].empty()) error(i + 1, "expected 4 integer fields");
      std::int64_t v[4];
      for (int j = 0; j < 4; ++j) {
        auto parsed = text::parse_int(nums[static_cast<size_t>(j + 1)]);
        if (!parsed) error(i + 1, "bad integer field");
        v[j] = *parsed;
      }
      data.functions.push_back({*name, v[0], v[1], v[2], v[3]});
    }
  }
  if (i >= lines.size()) error(i + 1, "truncated: missing '0 aggregates'");
  if (lines[i] != "0 aggregates") error(i + 1, "expected '0 aggregates'");
  ++i;
  for (; i < lines.size(); ++i) {
    if (lines[i].substr(0, 2) != "# ") error(i + 1, "unexpected content after aggregates");
    data.comments.emplace_back(lines[i].substr(2));
  }
  return data;
}

std::string encode_trace_line(const TraceEvent& e) {
  return std::to_string(e.ts_us) + " " + std::to_string(e.thread) + " " +
         std::string(probe::to_string(e.kind)) + " " + text::quote(e.name);
}

std::optional<TraceEvent> parse_trace_line(std::string_view line) {
  TraceEvent e;
  auto take = [&line]() -> std::string_view {
    auto sp = line.find(' ');
    if (sp == std::string_view::npos) return {};
    auto tok = line.substr(0, sp);
    line.remove_prefix(sp + 1);
    return tok;
  };
  auto ts = text::parse_int(take());
  auto thread = text::parse_int(take());
  auto kind = take();
  if (!ts || !thread || *thread < 0 || *thread > 0xffffffffLL) return std::nullopt;
  if (kind == "enter") {
    e.kind = probe::Kind::enter;
  } else if (kind == "exit") {
    e.kind = probe::Kind::exit;
  } else {
    return std::nullopt;
  }
  auto name = text::unquote_prefix(line);
  if (!name || !line.empty() || name->empty()) return std::nullopt;
  e.ts_us = *ts;
  e.thread = static_cast<ThreadIndex>(*thread);
  e.name = std::move(*name);
  return e;
}

}  // namespace mpx::prof
