#include <doctest.h>

#include <arpa/inet.h>

#include "mpx/bench/bench.hpp"
#include "mpx/net.hpp"
#include "mpx/prof/analysis.hpp"
#include "support.hpp"

using namespace mpx;
using testing::bin;
using testing::run_tool;

namespace {

std::string machines(const testing::TempDir& dir, int nodes) {
  std::string text;
  for (int i = 0; i < nodes; ++i) text += "127.0.0.1\n";
  write_file_atomic(dir / "machines", text);
  return (dir / "machines").string();
}

std::string port_base(int span = 120) { return std::to_string(testing::free_port_block(30000, span)); }

}  // namespace

TEST_CASE("mpxrun: usage errors exit 2 with the usage text") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"-np", "0", "--", "x"}, {"-np", "2"}, {"-np", "2", "-dev", "cluster", "--", "x"}, {"-bogus"}}) {
    std::vector<std::string> argv{bin("mpxrun")};
    argv.insert(argv.end(), args.begin(), args.end());
    auto r = run_tool(argv);
    CHECK(r.status.shell_code() == 2);
    CHECK(r.err.find("usage: mpxrun") != std::string::npos);
  }
}

TEST_CASE("mpxrun: multicore demo runs all ranks in one process") {
  testing::TempDir dir;
  auto r = run_tool({bin("mpxrun"), "-np", "3", "-conf", (dir / "c").string(), "--", bin("mpx-demo")}, dir.path());
  CHECK(r.status.shell_code() == 0);
  for (int rank = 0; rank < 3; ++rank) {
    CHECK(r.out.find("[rank 0-2] rank " + std::to_string(rank) + " of 3 done") != std::string::npos);
  }
}

TEST_CASE("mpxrun: cluster demo prefixes each rank") {
  testing::TempDir dir;
  auto r = run_tool({bin("mpxrun"), "-np", "4", "-dev", "cluster", "-machines", machines(dir, 2), "-portbase",
                     port_base(), "-conf", (dir / "c").string(), "--", bin("mpx-demo"), "--iters", "5"},
                    dir.path());
  CHECK(r.status.shell_code() == 0);
  for (int rank = 0; rank < 4; ++rank) {
    auto label = "[rank " + std::to_string(rank) + "] rank " + std::to_string(rank) + " of 4 done";
    CHECK(r.out.find(label) != std::string::npos);
  }
}

TEST_CASE("mpxrun: failing and killed ranks are reported per rank") {
  testing::TempDir dir;
  auto r = run_tool({bin("mpxrun"), "-np", "2", "-dev", "cluster", "-machines", machines(dir, 1), "-portbase",
                     port_base(), "-conf", (dir / "c").string(), "--", bin("mpx-demo"), "--fail-rank", "1",
                     "--fail-code", "3"},
                    dir.path());
  CHECK(r.status.shell_code() == 3);
  CHECK(r.err.find("mpxrun: rank 1 exited with code 3") != std::string::npos);

  r = run_tool({bin("mpxrun"), "-np", "2", "-dev", "cluster", "-machines", machines(dir, 1), "-portbase",
                port_base(), "-conf", (dir / "c").string(), "--", bin("mpx-demo"), "--kill-rank", "0"},
               dir.path());
  CHECK(r.status.shell_code() == 128 + 9);
  CHECK(r.err.find("mpxrun: rank 0 terminated by signal 9") != std::string::npos);
}

TEST_CASE("mpxrun: profiled runs name their files by node and thread") {
  testing::TempDir multicore;
  auto r = run_tool({bin("mpxrun"), "-np", "3", "-profile", "-profdir", (multicore / "p").string(), "-conf",
                     (multicore / "c").string(), "--", bin("mpx-demo")},
                    multicore.path());
  REQUIRE(r.status.shell_code() == 0);
  CHECK(testing::file_names(multicore / "p") ==
        std::vector<std::string>{"profile.0.0.0", "profile.0.0.1", "profile.0.0.2"});

  testing::TempDir cluster;
  r = run_tool({bin("mpxrun"), "-np", "4", "-dev", "cluster", "-machines", machines(cluster, 2), "-portbase",
                port_base(), "-profile", "-trace", "-profdir", (cluster / "p").string(), "-conf",
                (cluster / "c").string(), "--", bin("mpx-demo")},
               cluster.path());
  REQUIRE(r.status.shell_code() == 0);
  CHECK(testing::file_names(cluster / "p") ==
        std::vector<std::string>{"profile.0.0.0", "profile.1.0.0", "profile.2.0.0", "profile.3.0.0", "trace.0.0.0",
                                 "trace.1.0.0", "trace.2.0.0", "trace.3.0.0"});

  // A profiled program started without MPX_PROF_NODE writes node 0.
  testing::TempDir bare;
  r = run_tool({bin("mpx-demo")}, bare.path(), std::chrono::seconds(60),
               {{"MPX_SIZE", "1"}, {"MPX_MODE", "multicore"}, {"MPX_PROFILE", "1"},
                {"MPX_PROF_DIR", bare.path().string()}});
  REQUIRE(r.status.shell_code() == 0);
  CHECK(testing::file_names(bare.path()) == std::vector<std::string>{"profile.0.0.0"});
}

TEST_CASE("mpxprof: report, validate and merge on a real run") {
  testing::TempDir dir;
  auto prof = (dir / "p").string();
  auto r = run_tool({bin("mpxrun"), "-np", "2", "-dev", "cluster", "-machines", machines(dir, 1), "-portbase",
                     port_base(), "-profile", "-trace", "-profdir", prof, "-conf", (dir / "c").string(), "--",
                     bin("mpx-demo"), "--iters", "4"},
                    dir.path());
  REQUIRE(r.status.shell_code() == 0);

  auto rep = run_tool({bin("mpxprof"), "report", prof, "--scope", "mean", "--units", "ms"});
  CHECK(rep.status.shell_code() == 0);
  CHECK(rep.out.rfind("mean over 2 threads\n", 0) == 0);
  CHECK(rep.out.find("excl_ms") != std::string::npos);
  CHECK(testing::grep_lines(rep.out, "compute").size() == 1);
  auto compute = testing::grep_lines(rep.out, "compute")[0];
  CHECK(compute.find("  4.000  ") != std::string::npos);  // mean calls

  auto per = run_tool({bin("mpxprof"), "report", prof});
  CHECK(per.out.find("0.0.0\n") != std::string::npos);
  CHECK(per.out.find("1.0.0\n") != std::string::npos);

  auto csv = run_tool({bin("mpxprof"), "report", prof, "--format", "csv", "--scope", "total"});
  CHECK(csv.out.rfind("table,name,calls,subrs,excl_us,incl_us\n", 0) == 0);

  auto val = run_tool({bin("mpxprof"), "validate", prof});
  CHECK(val.status.shell_code() == 0);
  CHECK(val.out == "2 profiles clean\n");

  auto merged = (dir / "merged.txt").string();
  auto mer = run_tool({bin("mpxprof"), "merge", prof, "-o", merged});
  CHECK(mer.status.shell_code() == 0);
  auto events = prof::parse_merged(read_file(merged), merged);
  CHECK(prof::split(events) == prof::load_traces(prof));

  write_file_atomic(dir / "p" / "profile.5.0.0", "1 functions\n\"f\" 1 0 9 3\n0 aggregates\n");
  val = run_tool({bin("mpxprof"), "validate", prof});
  CHECK(val.status.shell_code() == 1);
  CHECK(val.out.find("5.0.0 \"f\"") != std::string::npos);

  auto bad = run_tool({bin("mpxprof"), "report", prof, "--units", "hours"});
  CHECK(bad.status.shell_code() != 0);
  auto empty = run_tool({bin("mpxprof"), "report", (dir / "nothing").string()});
  CHECK(empty.status.shell_code() == 1);
}

TEST_CASE("mpxdbg: scripted session against the demo") {
  testing::TempDir dir;
  auto run = testing::run_debug_demo(
      dir, 2, 1, testing::free_port_block(31000, 8),
      "wait-suspended 2\nall: BREAK compute\nall: RESUME\nwait-hits 2\nrank 0: STACK 0\nall: CLEAR compute\n"
      "all: RESUME\nwait-exit\n");
  CHECK(run.client.status.shell_code() == 0);
  CHECK(run.launcher.status.shell_code() == 0);
  CHECK(testing::grep_lines(run.client.out, "EVT HIT compute").size() == 2);
  CHECK(run.client.out.find("[rank 0] < FRAME compute\n[rank 0] < FRAME main\n") != std::string::npos);
  CHECK(run.client.out.find("[rank 1] exit 0") != std::string::npos);
}

TEST_CASE("mpxdbg: unreachable agents fail attach naming the rank") {
  testing::TempDir dir;
  int port = testing::free_port_block(31500, 1);
  write_file_atomic(dir / "c", "127.0.0.1 0 " + std::to_string(port) + "\n");
  write_file_atomic(dir / "s", "all: HELLO\n");
  auto r = run_tool({bin("mpxdbg"), "-conf", (dir / "c").string(), "--script", (dir / "s").string(),
                     "--connect-timeout", "1"});
  CHECK(r.status.shell_code() == 1);
  CHECK(r.err.find("rank 0") != std::string::npos);
}

TEST_CASE("bound debug port: the rank fails with address already in use") {
  testing::TempDir dir;
  int base = testing::free_port_block(32000, 110);
  auto holder = net::try_listen("0.0.0.0", static_cast<std::uint16_t>(base + 102));
  REQUIRE(holder.error == 0);
  auto r = run_tool({bin("mpxrun"), "-np", "4", "-dev", "cluster", "-machines", machines(dir, 2), "-debug",
                     std::to_string(base), "-conf", (dir / "c").string(), "--", bin("mpx-demo")},
                    dir.path());
  CHECK(r.status.shell_code() != 0);
  CHECK(r.err.find("address already in use") != std::string::npos);
  CHECK(r.err.find("mpxrun: rank 3 exited with code 98") != std::string::npos);
}

TEST_CASE("bench tools: EP checksums and overhead report") {
  testing::TempDir dir;
  auto ep = [&](int np, bool profiled, const std::string& out) {
    std::vector<std::string> argv{bin("mpxrun"), "-np", std::to_string(np), "-conf", (dir / "c").string()};
    if (profiled) {
      argv.insert(argv.end(), {"-profile", "-profdir", (dir / ("p" + out)).string()});
    }
    argv.insert(argv.end(), {"--", bin("bench-ep"), "--scale", "16", "--seed", "5", "--out", (dir / out).string()});
    auto r = run_tool(argv, dir.path());
    REQUIRE(r.status.shell_code() == 0);
    return bench::read_csv(dir / out).at(0);
  };
  auto base1 = ep(1, false, "b1.csv");
  auto base4 = ep(4, false, "b4.csv");
  auto prof4 = ep(4, true, "p4.csv");
  CHECK(base1.checksum == base4.checksum);
  CHECK(base4.checksum == prof4.checksum);
  CHECK(testing::file_names(dir / "pp4.csv").size() == 4);

  auto over = run_tool({bin("bench-overhead"), "--base", (dir / "b4.csv").string(), "--profiled",
                        (dir / "p4.csv").string()});
  CHECK(over.status.shell_code() == 0);
  CHECK(over.out.find("wall_s") != std::string::npos);

  auto mismatch = run_tool({bin("bench-overhead"), "--base", (dir / "b1.csv").string(), "--profiled",
                            (dir / "p4.csv").string()});
  CHECK(mismatch.status.shell_code() == 1);
}

TEST_CASE("bench tools: ping-pong CSV under mpxrun") {
  testing::TempDir dir;
  auto r = run_tool({bin("mpxrun"), "-np", "2", "-conf", (dir / "c").string(), "--", bin("bench-pingpong"),
                     "--sizes", "1,4096", "--reps", "100", "--out", (dir / "pp.csv").string()},
                    dir.path());
  REQUIRE(r.status.shell_code() == 0);
  auto rows = bench::read_csv(dir / "pp.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size == 1);
  CHECK(rows[1].size == 4096);
  CHECK(rows[0].latency_us > 0);
  CHECK(rows[1].bandwidth_mbps > 0);
}
