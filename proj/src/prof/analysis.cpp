#include "mpx/prof/analysis.hpp"

#include <algorithm>
#include <sstream>

#include "mpx/error.hpp"
#include "mpx/fileio.hpp"
#include "mpx/text.hpp"

namespace mpx::prof {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
void for_each_named(const fs::path& dir, std::string_view prefix, Fn&& fn) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot read directory " + dir.string() + ": " + ec.message());
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    auto id = parse_file_name(entry.path().filename().string(), prefix);
    if (id) fn(*id, entry.path());
  }
}

}  // namespace

ProfileSet load_profiles(const fs::path& dir) {
  ProfileSet set;
  set.dir = dir;
  for_each_named(dir, "profile", [&](const ProfileIdentity& id, const fs::path& path) {
    set.entries[id] = ProfileData::parse(read_file(path), path.string());
  });
  return set;
}

Scope parse_scope(std::string_view s) {
  if (s == "per-thread") return Scope::per_thread;
  if (s == "mean") return Scope::mean;
  if (s == "total") return Scope::total;
  fail(ErrorKind::usage, "unknown scope '" + std::string(s) + "' (per-thread|mean|total)");
}

SortKey parse_sort_key(std::string_view s) {
  if (s == "excl") return SortKey::excl;
  if (s == "incl") return SortKey::incl;
  if (s == "calls") return SortKey::calls;
  fail(ErrorKind::usage, "unknown sort key '" + std::string(s) + "' (excl|incl|calls)");
}

Units parse_units(std::string_view s) {
  if (s == "s") return Units::s;
  if (s == "ms") return Units::ms;
  if (s == "us") return Units::us;
  fail(ErrorKind::usage, "unknown units '" + std::string(s) + "' (s|ms|us)");
}

Format parse_format(std::string_view s) {
  if (s == "table") return Format::table;
  if (s == "csv") return Format::csv;
  fail(ErrorKind::usage, "unknown format '" + std::string(s) + "' (table|csv)");
}

std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::per_thread: return "per-thread";
    case Scope::mean: return "mean";
    case Scope::total: return "total";
  }
  return "per-thread";
}

std::string_view to_string(Units u) {
  switch (u) {
    case Units::s: return "s";
    case Units::ms: return "ms";
    case Units::us: return "us";
  }
  return "us";
}

namespace {

std::int64_t sort_value(const AggregateRow& r, SortKey key) {
  switch (key) {
    case SortKey::excl: return r.excl_us;
    case SortKey::incl: return r.incl_us;
    case SortKey::calls: return r.calls;
  }
  return r.excl_us;
}

void sort_rows(std::vector<AggregateRow>& rows, SortKey key) {
  std::sort(rows.begin(), rows.end(), [key](const AggregateRow& a, const AggregateRow& b) {
    auto va = sort_value(a, key);
    auto vb = sort_value(b, key);
    if (va != vb) return va > vb;
    return a.name < b.name;
  });
}

}  // namespace

std::vector<ReportTable> aggregate(const ProfileSet& set, Scope scope, SortKey key) {
  if (set.entries.empty()) fail(ErrorKind::report, "no profiles in " + set.dir.string());
  std::vector<ReportTable> tables;
  if (scope == Scope::per_thread) {
    for (const auto& [id, data] : set.entries) {
      ReportTable t;
      t.title = to_string(id);
      for (const auto& f : data.functions) t.rows.push_back({f.name, f.calls, f.subrs, f.excl_us, f.incl_us, 1});
      sort_rows(t.rows, key);
      tables.push_back(std::move(t));
    }
    return tables;
  }
  std::map<std::string, AggregateRow> sums;
  for (const auto& [id, data] : set.entries) {
    for (const auto& f : data.functions) {
      auto& row = sums[f.name];
      row.name = f.name;
      row.calls += f.calls;
      row.subrs += f.subrs;
      row.excl_us += f.excl_us;
      row.incl_us += f.incl_us;
    }
  }
  auto n = static_cast<std::int64_t>(set.entries.size());
  ReportTable t;
  t.title = std::string(to_string(scope)) + " over " + std::to_string(n) + (n == 1 ? " thread" : " threads");
  for (auto& [name, row] : sums) {
    row.divisor = scope == Scope::mean ? n : 1;
    t.rows.push_back(row);
  }
  sort_rows(t.rows, key);
  tables.push_back(std::move(t));
  return tables;
}

namespace {

std::string three_decimals(__int128 num, __int128 den) {
  bool negative = (num < 0) != (den < 0) && num != 0;
  if (num < 0) num = -num;
  if (den < 0) den = -den;
  __int128 scaled = (num * 1000 * 2 + den) / (den * 2);  // half away from zero
  auto whole = static_cast<long long>(scaled / 1000);
  auto frac = static_cast<int>(scaled % 1000);
  std::string f = std::to_string(frac);
  f.insert(0, 3 - f.size(), '0');
  std::string out = std::to_string(whole) + "." + f;
  if (negative && scaled != 0) out.insert(0, "-");
  return out;
}

}  // namespace

std::string format_time(std::int64_t numerator_us, std::int64_t divisor, Units units) {
  if (divisor <= 0) fail(ErrorKind::argument, "divisor must be positive");
  if (units == Units::us) return format_count(numerator_us, divisor);
  __int128 scale = units == Units::s ? 1000000 : 1000;
  return three_decimals(numerator_us, static_cast<__int128>(divisor) * scale);
}

std::string format_count(std::int64_t numerator, std::int64_t divisor) {
  if (divisor <= 0) fail(ErrorKind::argument, "divisor must be positive");
  if (divisor == 1) return std::to_string(numerator);
  return three_decimals(numerator, divisor);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> row_cells(const AggregateRow& r, Units units) {
  return {r.name, format_count(r.calls, r.divisor), format_count(r.subrs, r.divisor),
          format_time(r.excl_us, r.divisor, units), format_time(r.incl_us, r.divisor, units)};
}

}  // namespace

std::string report(const ProfileSet& set, const ReportOptions& options) {
  auto tables = aggregate(set, options.scope, options.sort);
  std::string u(to_string(options.units));
  std::vector<std::string> header{"name", "calls", "subrs", "excl_" + u, "incl_" + u};
  std::ostringstream out;

  if (options.format == Format::csv) {
    out << "table";
    for (const auto& h : header) out << ',' << h;
    out << '\n';
    for (const auto& t : tables) {
      for (const auto& r : t.rows) {
        out << csv_field(t.title);
        for (const auto& c : row_cells(r, options.units)) out << ',' << csv_field(c);
        out << '\n';
      }
    }
    return out.str();
  }

  bool first = true;
  for (const auto& t : tables) {
    if (!first) out << '\n';
    first = false;
    std::vector<std::vector<std::string>> cells{header};
    for (const auto& r : t.rows) cells.push_back(row_cells(r, options.units));
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : cells) {
      for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    out << t.title << '\n';
    for (const auto& row : cells) {
      std::string line = row[0] + std::string(width[0] - row[0].size(), ' ');
      for (std::size_t i = 1; i < row.size(); ++i) {
        line += "  " + std::string(width[i] - row[i].size(), ' ') + row[i];
      }
      out << line << '\n';
    }
  }
  return out.str();
}

std::string Violation::describe() const {
  std::string out = to_string(identity);
  if (!function.empty()) out += " " + text::quote(function);
  return out + ": " + message;
}

std::vector<Violation> validate(const ProfileSet& set) {
  std::vector<Violation> out;
  for (const auto& [id, data] : set.entries) {
    std::int64_t excl_sum = 0;
    const FunctionStats* root = nullptr;
    for (const auto& f : data.functions) {
      auto add = [&](std::string message) { out.push_back({id, f.name, std::move(message)}); };
      if (f.calls < 0 || f.subrs < 0 || f.excl_us < 0 || f.incl_us < 0) add("negative value");
      if (f.incl_us < f.excl_us) {
        add("inclusive " + std::to_string(f.incl_us) + " < exclusive " + std::to_string(f.excl_us));
      }
      excl_sum += f.excl_us;
      if (f.name == root_name) root = &f;
    }
    if (data.functions.empty()) continue;
    if (root == nullptr) {
      out.push_back({id, "", "no " + std::string(root_name) + " entry"});
    } else if (excl_sum != root->incl_us) {
      out.push_back({id, "", "exclusive times sum to " + std::to_string(excl_sum) + ", root inclusive is " +
                                 std::to_string(root->incl_us)});
    }
  }
  return out;
}

TraceSet load_traces(const fs::path& dir) {
  TraceSet set;
  for_each_named(dir, "trace", [&](const ProfileIdentity& id, const fs::path& path) {
    auto& events = set.traces[id];
    int number = 0;
    std::string body = read_file(path);
    for (auto line : text::split(body, '\n')) {
      ++number;
      if (line.empty()) continue;
      auto e = parse_trace_line(line);
      if (!e) fail(ErrorKind::parse, path.string() + ":" + std::to_string(number) + ": bad trace event");
      events.push_back(std::move(*e));
    }
  });
  return set;
}

std::vector<MergedEvent> merge(const TraceSet& set) {
  std::vector<MergedEvent> out;
  for (const auto& [id, events] : set.traces) {
    for (const auto& e : events) out.push_back({id, e});
  }
  // Input is grouped by identity in order, so a stable sort on the timestamp
  // leaves ties ordered by identity and then by file position.
  std::stable_sort(out.begin(), out.end(),
                   [](const MergedEvent& a, const MergedEvent& b) { return a.event.ts_us < b.event.ts_us; });
  return out;
}

std::string encode_merged(const std::vector<MergedEvent>& events) {
  std::string out;
  for (const auto& m : events) {
    out += std::to_string(m.event.ts_us) + " " + std::to_string(m.identity.node) + " " +
           std::to_string(m.identity.context) + " " + std::to_string(m.identity.thread) + " " +
           std::string(probe::to_string(m.event.kind)) + " " + text::quote(m.event.name) + "\n";
  }
  return out;
}

std::vector<MergedEvent> parse_merged(std::string_view text, const std::string& source) {
  std::vector<MergedEvent> out;
  int number = 0;
  for (auto line : text::split(text, '\n')) {
    ++number;
    if (line.empty()) continue;
    auto bad = [&] { fail(ErrorKind::parse, source + ":" + std::to_string(number) + ": bad merged event"); };
    // "<ts> <node> <context> <thread> <kind> "<name>"": peel node and
    // context, then reuse the trace-line parser for the rest.
    std::string_view rest = line;
    std::vector<std::string_view> head;
    for (int i = 0; i < 3; ++i) {
      auto sp = rest.find(' ');
      if (sp == std::string_view::npos) bad();
      head.push_back(rest.substr(0, sp));
      rest.remove_prefix(sp + 1);
    }
    auto node = text::parse_int(head[1]);
    auto context = text::parse_int(head[2]);
    auto e = parse_trace_line(std::string(head[0]) + " " + std::string(rest));
    if (!node || !context || !e) bad();
    MergedEvent m;
    m.identity = {static_cast<int>(*node), static_cast<int>(*context), static_cast<int>(e->thread)};
    m.event = std::move(*e);
    out.push_back(std::move(m));
  }
  return out;
}

TraceSet split(const std::vector<MergedEvent>& events) {
  TraceSet set;
  for (const auto& m : events) set.traces[m.identity].push_back(m.event);
  return set;
}

std::size_t merge_traces(const fs::path& dir, const fs::path& out) {
  TraceSet set = load_traces(dir);
  if (set.traces.empty()) fail(ErrorKind::report, "no trace files in " + dir.string());
  auto merged = merge(set);
  write_file_atomic(out, encode_merged(merged));
  return merged.size();
}

}  // namespace mpx::prof
