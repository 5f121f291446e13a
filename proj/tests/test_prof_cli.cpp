#include <doctest.h>

#include <array>
#include <map>
#include <random>
#include <regex>

#include "mpx/error.hpp"
#include "mpx/prof/analysis.hpp"
#include "mpx/prof/profiler.hpp"
#include "mpx/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mpx;
using namespace mpx::prof;

namespace {

void write_profile(const testing::TempDir& dir, ProfileIdentity id, std::vector<FunctionStats> functions) {
  ProfileData d;
  d.functions = std::move(functions);
  sort_by_exclusive(d.functions);
  write_file_atomic(dir / profile_file_name(id), d.encode());
}

/// Splits a table line on runs of two or more spaces.
std::vector<std::string> columns(const std::string& line) {
  static const std::regex sep(" {2,}");
  std::vector<std::string> out;
  for (std::sregex_token_iterator it(line.begin(), line.end(), sep, -1), end; it != end; ++it) {
    std::string cell = *it;
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

std::vector<FunctionStats> random_functions(std::mt19937& rng) {
  static const char* names[] = {"main", "compute", "MPX_Send", "MPX_Recv", "reduce", "io"};
  std::vector<FunctionStats> out;
  for (const char* n : names) {
    if (rng() % 3 == 0) continue;
    std::int64_t excl = rng() % 100000;
    out.push_back({n, 1 + static_cast<std::int64_t>(rng() % 50), static_cast<std::int64_t>(rng() % 20), excl,
                   excl + static_cast<std::int64_t>(rng() % 100000)});
  }
  return out;
}

}  // namespace

TEST_CASE("load_profiles discovers files by name and ignores others") {
  testing::TempDir dir;
  write_profile(dir, {0, 0, 0}, {{"f", 1, 0, 3, 3}});
  write_profile(dir, {1, 0, 0}, {{"f", 1, 0, 4, 4}});
  write_file_atomic(dir / "profile.0.0.x", "garbage");
  write_file_atomic(dir / "notes.txt", "garbage");
  auto set = load_profiles(dir.path());
  CHECK(set.entries.size() == 2);
  CHECK(set.entries.count({1, 0, 0}) == 1);
  CHECK(set.entries.at({1, 0, 0}).functions[0].excl_us == 4);
}

TEST_CASE("a truncated profile is a load error naming file and line") {
  testing::TempDir dir;
  write_file_atomic(dir / "profile.0.0.0", "1 functions\n\"f\" 1 0 3 3\n");
  try {
    load_profiles(dir.path());
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    std::string what = e.what();
    CHECK(what.find("profile.0.0.0") != std::string::npos);
    CHECK(what.find(":3") != std::string::npos);
  }
}

TEST_CASE("mean of two threads and absent-as-zero") {
  testing::TempDir dir;
  write_profile(dir, {0, 0, 0}, {{"f", 1, 0, 10, 10}, {"g", 1, 0, 8, 8}});
  write_profile(dir, {0, 0, 1}, {{"f", 1, 0, 20, 20}});
  auto set = load_profiles(dir.path());
  auto tables = aggregate(set, Scope::mean, SortKey::excl);
  REQUIRE(tables.size() == 1);
  CHECK(tables[0].title == "mean over 2 threads");
  REQUIRE(tables[0].rows.size() == 2);
  CHECK(tables[0].rows[0] == AggregateRow{"f", 2, 0, 30, 30, 2});
  CHECK(tables[0].rows[1] == AggregateRow{"g", 1, 0, 8, 8, 2});
  CHECK(format_time(30, 2, Units::us) == "15.000");
  CHECK(format_time(8, 2, Units::us) == "4.000");

  auto text = report(set, {Scope::mean, SortKey::excl, Units::us, Format::table});
  auto lines = text::split(text, '\n');
  CHECK(lines[0] == "mean over 2 threads");
  CHECK(columns(std::string(lines[1])) == std::vector<std::string>{"name", "calls", "subrs", "excl_us", "incl_us"});
  CHECK(columns(std::string(lines[2])) == std::vector<std::string>{"f", "1.000", "0.000", "15.000", "15.000"});
  CHECK(columns(std::string(lines[3])) == std::vector<std::string>{"g", "0.500", "0.000", "4.000", "4.000"});
}

TEST_CASE("mean of a single identity equals its per-thread table") {
  testing::TempDir dir;
  write_profile(dir, {3, 0, 0}, {{"f", 2, 1, 7, 9}, {"g", 1, 0, 2, 2}, {".application", 1, 1, 0, 9}});
  auto set = load_profiles(dir.path());
  auto per = aggregate(set, Scope::per_thread, SortKey::excl);
  auto mean = aggregate(set, Scope::mean, SortKey::excl);
  REQUIRE(per.size() == 1);
  CHECK(per[0].title == "3.0.0");
  CHECK(mean[0].title == "mean over 1 thread");
  CHECK(per[0].rows == mean[0].rows);
}

TEST_CASE("empty set is a report error") {
  testing::TempDir dir;
  try {
    report(load_profiles(dir.path()), {});
    FAIL("expected report error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::report);
  }
}

TEST_CASE("mean and total agree with a brute-force recomputation") {
  std::mt19937 rng(31);
  for (int corpus = 0; corpus < 40; ++corpus) {
    testing::TempDir dir;
    int n = 1 + static_cast<int>(rng() % 6);
    std::map<std::string, std::array<std::int64_t, 4>> sums;  // calls, subrs, excl, incl
    for (int t = 0; t < n; ++t) {
      auto fs = random_functions(rng);
      for (const auto& f : fs) {
        auto& s = sums[f.name];
        s[0] += f.calls;
        s[1] += f.subrs;
        s[2] += f.excl_us;
        s[3] += f.incl_us;
      }
      write_profile(dir, {t % 2, 0, t}, fs);
    }
    if (sums.empty()) continue;
    auto set = load_profiles(dir.path());
    for (auto scope : {Scope::mean, Scope::total}) {
      auto rows = aggregate(set, scope, SortKey::excl)[0].rows;
      REQUIRE(rows.size() == sums.size());
      for (const auto& r : rows) {
        const auto& s = sums.at(r.name);
        CHECK(r.calls == s[0]);
        CHECK(r.subrs == s[1]);
        CHECK(r.excl_us == s[2]);
        CHECK(r.incl_us == s[3]);
        CHECK(r.divisor == (scope == Scope::mean ? n : 1));
      }
      for (std::size_t i = 1; i < rows.size(); ++i) {
        bool ordered = rows[i - 1].excl_us > rows[i].excl_us ||
                       (rows[i - 1].excl_us == rows[i].excl_us && rows[i - 1].name < rows[i].name);
        CHECK(ordered);
      }
    }
    // Rendered values match independent decimal arithmetic.
    auto csv = report(set, {Scope::mean, SortKey::excl, Units::ms, Format::csv});
    auto lines = text::split(csv, '\n');
    CHECK(lines[0] == "table,name,calls,subrs,excl_ms,incl_ms");
    for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
      auto cells = text::split(lines[i], ',');
      const auto& s = sums.at(std::string(cells[1]));
      CHECK(cells[4] == oracle::decimal3(s[2], 1000LL * n));
      CHECK(cells[5] == oracle::decimal3(s[3], 1000LL * n));
    }
  }
}

TEST_CASE("sorting by calls and incl, ties by name") {
  testing::TempDir dir;
  write_profile(dir, {0, 0, 0}, {{"b", 5, 0, 1, 9}, {"a", 5, 0, 1, 9}, {"c", 7, 0, 3, 4}});
  auto set = load_profiles(dir.path());
  auto by_calls = aggregate(set, Scope::total, SortKey::calls)[0].rows;
  CHECK(by_calls[0].name == "c");
  CHECK(by_calls[1].name == "a");
  CHECK(by_calls[2].name == "b");
  auto by_incl = aggregate(set, Scope::total, SortKey::incl)[0].rows;
  CHECK(by_incl[0].name == "a");
  CHECK(by_incl[1].name == "b");
  CHECK(by_incl[2].name == "c");
}

TEST_CASE("unit conversion is exact") {
  CHECK(format_time(1234567, 1, Units::s) == "1.235");
  CHECK(format_time(1234567, 1, Units::ms) == "1234.567");
  CHECK(format_time(1234567, 1, Units::us) == "1234567");
  CHECK(format_time(1500, 1, Units::ms) == "1.500");
  CHECK(format_time(500, 1, Units::s) == "0.001");
  CHECK(format_time(499, 1, Units::s) == "0.000");
  CHECK(format_time(10, 3, Units::us) == "3.333");
  CHECK(format_time(20, 3, Units::us) == "6.667");
  CHECK(format_time(0, 4, Units::ms) == "0.000");
  CHECK(format_count(7, 1) == "7");
  CHECK(format_count(7, 2) == "3.500");
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    std::int64_t n = static_cast<std::int64_t>(rng() % 10'000'000'000ULL);
    std::int64_t d = 1 + static_cast<std::int64_t>(rng() % 64);
    CHECK(format_time(n, d, Units::ms) == oracle::decimal3(n, 1000 * d));
    CHECK(format_time(n, d, Units::s) == oracle::decimal3(n, 1000000 * d));
  }
  CHECK_THROWS_AS(parse_units("h"), Error);
  CHECK_THROWS_AS(parse_scope("all"), Error);
  CHECK(parse_scope("per-thread") == Scope::per_thread);
}

TEST_CASE("validate accepts profiler output and flags injected faults") {
  testing::TempDir dir;
  Profiler p({0, dir.path(), false});
  p.on_probe({"main", probe::Kind::enter, 0, 0});
  p.on_probe({"f", probe::Kind::enter, 0, 3});
  p.on_probe({"f", probe::Kind::exit, 0, 8});
  p.on_probe({"main", probe::Kind::exit, 0, 11});
  p.register_thread(1);
  p.flush();
  CHECK(validate(load_profiles(dir.path())).empty());

  write_profile(dir, {0, 0, 2}, {{"f", 1, 0, 5, 3}, {".application", 1, 1, 0, 5}});
  auto v = validate(load_profiles(dir.path()));
  REQUIRE(v.size() == 1);
  CHECK(v[0].identity == ProfileIdentity{0, 0, 2});
  CHECK(v[0].function == "f");
  CHECK(v[0].describe().find("0.0.2 \"f\"") == 0);

  testing::TempDir sums;
  write_profile(sums, {1, 0, 0}, {{"f", 1, 0, 5, 5}, {".application", 1, 1, 1, 5}});
  v = validate(load_profiles(sums.path()));
  REQUIRE(v.size() == 1);
  CHECK(v[0].function.empty());
}

TEST_CASE("merge orders by timestamp with node ties first") {
  TraceSet set;
  set.traces[{1, 0, 0}] = {{5, 0, probe::Kind::enter, "a"}};
  set.traces[{0, 0, 0}] = {{3, 0, probe::Kind::enter, "b"}, {5, 0, probe::Kind::enter, "c"}};
  auto merged = merge(set);
  REQUIRE(merged.size() == 3);
  CHECK(merged[0].event.ts_us == 3);
  CHECK(merged[1].identity.node == 0);
  CHECK(merged[1].event.name == "c");
  CHECK(merged[2].identity.node == 1);
  CHECK(encode_merged(merged) == "3 0 0 0 enter \"b\"\n5 0 0 0 enter \"c\"\n5 1 0 0 enter \"a\"\n");
}

TEST_CASE("merged timelines are sorted and re-split to their inputs") {
  std::mt19937 rng(12);
  for (int corpus = 0; corpus < 30; ++corpus) {
    testing::TempDir dir;
    int files = 1 + static_cast<int>(rng() % 5);
    std::size_t total = 0;
    for (int f = 0; f < files; ++f) {
      Profiler p({f, dir.path(), true});
      std::int64_t ts = rng() % 10;
      std::vector<std::string> stack;
      for (int i = 0; i < 30; ++i) {
        ts += rng() % 3;
        if (stack.empty() || rng() % 2) {
          stack.push_back(rng() % 2 ? "x" : "y");
          p.on_probe({stack.back(), probe::Kind::enter, 0, ts});
        } else {
          p.on_probe({stack.back(), probe::Kind::exit, 0, ts});
          stack.pop_back();
        }
        ++total;
      }
      while (!stack.empty()) {
        p.on_probe({stack.back(), probe::Kind::exit, 0, ts});
        stack.pop_back();
        ++total;
      }
      p.flush();
    }
    auto traces = load_traces(dir.path());
    auto out = dir / "merged.txt";
    CHECK(merge_traces(dir.path(), out) == total);
    auto merged = parse_merged(read_file(out), "merged.txt");
    CHECK(merged.size() == total);
    for (std::size_t i = 1; i < merged.size(); ++i) CHECK(merged[i - 1].event.ts_us <= merged[i].event.ts_us);
    CHECK(split(merged) == traces);
  }
}

TEST_CASE("merge errors: no traces, unparseable lines") {
  testing::TempDir dir;
  try {
    merge_traces(dir.path(), dir / "out");
    FAIL("expected report error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::report);
  }
  write_file_atomic(dir / "trace.0.0.0", "1 0 enter \"a\"\n2 0 sideways \"a\"\n");
  try {
    merge_traces(dir.path(), dir / "out");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find("trace.0.0.0:2") != std::string::npos);
  }
}

TEST_CASE("writer and parser are byte-stable on random profiles") {
  std::mt19937 rng(77);
  for (int i = 0; i < 200; ++i) {
    ProfileData d;
    d.functions = random_functions(rng);
    sort_by_exclusive(d.functions);
    d.comments = {"thread 0 native 12"};
    auto text = d.encode();
    CHECK(ProfileData::parse(text, "x").encode() == text);
  }
}
