#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "mpx/error.hpp"
#include "mpx/harness/context.hpp"
#include "mpx/harness/probe.hpp"
#include "mpx/launcher/conf_file.hpp"
#include "support.hpp"

using namespace mpx;

namespace {

Environment multicore(int rank, int size) {
  Environment env;
  env.rank = rank;
  env.size = size;
  return env;
}

/// Runs `body(ctx)` on one thread per rank over a shared fabric.
template <typename Body>
void run_multicore(int size, Body body, std::size_t capacity = default_channel_capacity) {
  auto fabric = make_multicore_fabric(size, capacity);
  std::vector<std::thread> threads;
  for (int r = 0; r < size; ++r) {
    threads.emplace_back([&, r] {
      auto ctx = init(multicore(r, size), fabric);
      body(ctx);
      ctx.finalize();
    });
  }
  for (auto& t : threads) t.join();
}

/// Cluster ranks as threads in this process, talking over loopback TCP.
template <typename Body>
void run_cluster(int size, Body body) {
  testing::TempDir dir;
  int base = testing::free_port_block(41000, 2 * size);
  launcher::ConfFile conf;
  for (int r = 0; r < size; ++r) conf.records.push_back({"127.0.0.1", r, static_cast<std::uint16_t>(base + 2 * r)});
  conf.write(dir / "mpjdev.conf");
  std::vector<std::thread> threads;
  for (int r = 0; r < size; ++r) {
    threads.emplace_back([&, r] {
      Environment env;
      env.rank = r;
      env.size = size;
      env.mode = Mode::cluster;
      env.conf_path = (dir / "mpjdev.conf").string();
      env.connect_timeout = std::chrono::seconds(10);
      auto ctx = init(env);
      body(ctx);
      ctx.barrier();
      ctx.finalize();
    });
  }
  for (auto& t : threads) t.join();
}

struct Recorder : probe::Sink {
  std::mutex mutex;
  std::vector<std::pair<std::string, probe::Kind>> events;
  void on_probe(const probe::Site& site) override {
    std::lock_guard lock(mutex);
    events.emplace_back(std::string(site.name), site.kind);
  }
};

}  // namespace

TEST_CASE("environment variables map onto Environment") {
  auto env = Environment::from_variables({{"MPX_RANK", "2"}, {"MPX_SIZE", "4"}, {"MPX_MODE", "cluster"}, {"MPX_CONF", "c"}});
  CHECK(env.rank == 2);
  CHECK(env.size == 4);
  CHECK(env.mode == Mode::cluster);
  CHECK(env.conf_path == "c");
  CHECK(env.connect_timeout == std::chrono::seconds(30));

  env = Environment::from_variables({{"MPX_SIZE", "3"}, {"MPX_MODE", "multicore"}, {"MPX_CONNECT_TIMEOUT_S", "5"}});
  CHECK(env.rank == 0);
  CHECK(env.connect_timeout == std::chrono::seconds(5));

  for (const auto& bad : std::vector<std::map<std::string, std::string>>{
           {{"MPX_MODE", "multicore"}},
           {{"MPX_SIZE", "x"}, {"MPX_MODE", "multicore"}},
           {{"MPX_SIZE", "2"}, {"MPX_MODE", "grid"}},
           {{"MPX_SIZE", "2"}, {"MPX_MODE", "cluster"}, {"MPX_RANK", "0"}},
           {{"MPX_SIZE", "2"}, {"MPX_MODE", "cluster"}, {"MPX_RANK", "2"}, {"MPX_CONF", "c"}},
       }) {
    try {
      Environment::from_variables(bad);
      FAIL("accepted invalid environment");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::config);
    }
  }
}

TEST_CASE("singleton context loops back to itself") {
  auto ctx = init(multicore(0, 1));
  CHECK(ctx.rank() == 0);
  CHECK(ctx.size() == 1);
  ctx.send(0, 7, "abc");
  CHECK(ctx.recv_string(0, 7) == "abc");
  ctx.send(0, 0, Bytes{});
  CHECK(ctx.recv(0, 0).empty());
  ctx.send(0, 3, "x");
  ctx.send(0, 3, "y");
  CHECK(ctx.recv_string(0, 3) == "x");
  CHECK(ctx.recv_string(0, 3) == "y");
  ctx.barrier();
}

TEST_CASE("bounds, reserved tag and lifecycle errors") {
  auto ctx = init(multicore(0, 1));
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::timeout;  // sentinel: nothing thrown
  };
  CHECK(kind_of([&] { ctx.send(1, 0, "x"); }) == ErrorKind::argument);
  CHECK(kind_of([&] { ctx.recv(-1, 0); }) == ErrorKind::argument);
  CHECK(kind_of([&] { ctx.send(0, reserved_tag, "x"); }) == ErrorKind::argument);
  ctx.finalize();
  CHECK(ctx.finalized());
  CHECK(kind_of([&] { ctx.barrier(); }) == ErrorKind::state);
  CHECK(kind_of([&] { ctx.send(0, 0, "x"); }) == ErrorKind::state);
  CHECK(kind_of([] { init(multicore(0, 2)); }) == ErrorKind::config);
}

TEST_CASE("two ranks exchange a message in multicore mode") {
  std::string got;
  run_multicore(2, [&](CommContext& ctx) {
    if (ctx.rank() == 0) {
      ctx.send(1, 1, "ab");
    } else {
      got = ctx.recv_string(0, 1);
    }
  });
  CHECK(got == "ab");
}

TEST_CASE("FIFO per channel holds under randomized schedules") {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const int size = 4;
    std::mt19937 plan_rng(seed);
    // counts[src][dest][tag]
    int counts[size][size][3];
    for (auto& a : counts)
      for (auto& b : a)
        for (int& c : b) c = static_cast<int>(plan_rng() % 20);
    std::atomic<int> violations{0};
    run_multicore(size, [&](CommContext& ctx) {
      std::mt19937 rng(seed * 100 + static_cast<unsigned>(ctx.rank()));
      std::vector<std::pair<int, int>> sends;  // (dest, tag), one per message
      for (int d = 0; d < size; ++d)
        for (int t = 0; t < 3; ++t)
          for (int k = 0; k < counts[ctx.rank()][d][t]; ++k) sends.emplace_back(d, t);
      std::shuffle(sends.begin(), sends.end(), rng);
      int next_seq[size][3] = {};
      for (auto [d, t] : sends) {
        ctx.send(d, t, std::to_string(next_seq[d][t]++));
        if (rng() % 4 == 0) std::this_thread::yield();
      }
      std::vector<std::pair<int, int>> recvs;
      for (int s = 0; s < size; ++s)
        for (int t = 0; t < 3; ++t)
          for (int k = 0; k < counts[s][ctx.rank()][t]; ++k) recvs.emplace_back(s, t);
      std::shuffle(recvs.begin(), recvs.end(), rng);
      int expect[size][3] = {};
      for (auto [s, t] : recvs) {
        if (ctx.recv_string(s, t) != std::to_string(expect[s][t]++)) violations++;
      }
    });
    CHECK(violations == 0);
  }
}

TEST_CASE("a full channel blocks the sender without reordering") {
  std::vector<int> got;
  run_multicore(
      2,
      [&](CommContext& ctx) {
        if (ctx.rank() == 0) {
          for (int i = 0; i < 200; ++i) ctx.send(1, 5, std::to_string(i));
        } else {
          for (int i = 0; i < 200; ++i) got.push_back(std::stoi(ctx.recv_string(0, 5)));
        }
      },
      2);
  REQUIRE(got.size() == 200);
  for (int i = 0; i < 200; ++i) CHECK(got[i] == i);
}

TEST_CASE("barrier: no rank leaves before every rank arrived") {
  for (int round = 0; round < 10; ++round) {
    const int size = 4;
    std::vector<std::int64_t> before(size);
    std::vector<std::int64_t> after(size);
    run_multicore(size, [&](CommContext& ctx) {
      std::this_thread::sleep_for(std::chrono::microseconds(200 * ((ctx.rank() + round) % size)));
      before[ctx.rank()] = probe::now_us();
      ctx.barrier();
      after[ctx.rank()] = probe::now_us();
    });
    CHECK(*std::min_element(after.begin(), after.end()) >= *std::max_element(before.begin(), before.end()));
  }
}

TEST_CASE("cluster ranks read their ports from the conf file and exchange messages") {
  std::string got;
  run_cluster(2, [&](CommContext& ctx) {
    CHECK(ctx.mode() == Mode::cluster);
    if (ctx.rank() == 0) {
      ctx.send(1, 1, "ab");
    } else {
      got = ctx.recv_string(0, 1);
    }
  });
  CHECK(got == "ab");
}

TEST_CASE("cluster init reports a bad conf size") {
  testing::TempDir dir;
  launcher::ConfFile conf;
  conf.records.push_back({"127.0.0.1", 0, 41990});
  conf.write(dir / "c");
  Environment env;
  env.rank = 0;
  env.size = 2;
  env.mode = Mode::cluster;
  env.conf_path = (dir / "c").string();
  CHECK_THROWS_AS(init(env), Error);
}

TEST_CASE("a deterministic program sees identical payloads in both modes") {
  auto program = [](std::vector<std::string>& log, std::mutex& m) {
    return [&log, &m](CommContext& ctx) {
      std::mt19937 rng(77 + static_cast<unsigned>(ctx.rank()));
      int next = (ctx.rank() + 1) % ctx.size();
      int prev = (ctx.rank() + ctx.size() - 1) % ctx.size();
      for (int i = 0; i < 20; ++i) {
        std::string payload(rng() % 64, static_cast<char>('a' + rng() % 26));
        ctx.send(next, i % 3, payload);
        std::string in = ctx.recv_string(prev, i % 3);
        std::lock_guard lock(m);
        log.push_back(std::to_string(ctx.rank()) + ":" + std::to_string(i) + ":" + in);
      }
    };
  };
  std::vector<std::string> a;
  std::vector<std::string> b;
  std::mutex ma;
  std::mutex mb;
  run_multicore(3, program(a, ma));
  run_cluster(3, program(b, mb));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK(a.size() == 60);
}

TEST_CASE("probe scopes nest, count and unwind") {
  Recorder rec;
  probe::install(probe::Slot::observer, &rec);
  probe::probe_scope("a", [] { probe::probe_scope("b", [] {}); });
  for (int i = 0; i < 3; ++i) probe::probe_scope("f", [] {});
  CHECK_THROWS_AS(probe::probe_scope("g", []() -> int { throw std::runtime_error("boom"); }), std::runtime_error);
  auto r = probe::probe_scope("h", [] { return 5; });
  probe::install(probe::Slot::observer, nullptr);
  CHECK(r == 5);

  using K = probe::Kind;
  std::vector<std::pair<std::string, K>> expect = {{"a", K::enter}, {"b", K::enter}, {"b", K::exit}, {"a", K::exit}};
  for (int i = 0; i < 3; ++i) {
    expect.emplace_back("f", K::enter);
    expect.emplace_back("f", K::exit);
  }
  expect.insert(expect.end(), {{"g", K::enter}, {"g", K::exit}, {"h", K::enter}, {"h", K::exit}});
  CHECK(rec.events == expect);
}

TEST_CASE("probe streams are balanced per thread under concurrency") {
  struct PerThread : probe::Sink {
    std::mutex mutex;
    std::map<ThreadIndex, std::vector<std::string>> stacks;
    int errors = 0;
    void on_probe(const probe::Site& site) override {
      std::lock_guard lock(mutex);
      auto& st = stacks[site.thread];
      if (site.kind == probe::Kind::enter) {
        st.emplace_back(site.name);
      } else if (st.empty() || st.back() != site.name) {
        errors++;
      } else {
        st.pop_back();
      }
    }
  } sink;
  probe::install(probe::Slot::observer, &sink);
  run_multicore(4, [](CommContext& ctx) {
    for (int i = 0; i < 50; ++i) {
      probe::probe_scope("step", [&] {
        ctx.send((ctx.rank() + 1) % 4, 0, "x");
        ctx.recv((ctx.rank() + 3) % 4, 0);
      });
    }
    ctx.barrier();
  });
  probe::install(probe::Slot::observer, nullptr);
  CHECK(sink.errors == 0);
  for (const auto& [t, st] : sink.stacks) CHECK(st.empty());
}

TEST_CASE("inspectables are unique per context") {
  auto ctx = init(multicore(0, 1));
  ctx.register_inspectable("iter", [] { return std::string("42"); });
  auto entry = ctx.inspectables()->find("iter");
  REQUIRE(entry.has_value());
  CHECK(entry->provider() == "42");
  CHECK_FALSE(ctx.inspectables()->find("unknown").has_value());
  try {
    ctx.register_inspectable("iter", [] { return std::string("0"); });
    FAIL("duplicate accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::argument);
  }
}
