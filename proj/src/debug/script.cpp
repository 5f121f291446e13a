#include "mpx/debug/script.hpp"

#include <algorithm>

#include "mpx/error.hpp"
#include "mpx/text.hpp"

namespace mpx::debug {

std::optional<ScriptStep> parse_step(std::string_view line) {
  line = text::trim(line);
  if (line.empty() || line.front() == '#') return std::nullopt;
  ScriptStep step;
  auto words = text::split_ws(line);
  auto count_arg = [&](ScriptStep::Kind kind) {
    auto k = words.size() == 2 ? text::parse_int(words[1]) : std::nullopt;
    if (!k || *k < 0) fail(ErrorKind::parse, "expected a non-negative count: " + std::string(line));
    step.kind = kind;
    step.count = static_cast<int>(*k);
    return step;
  };
  if (words[0] == "wait-hits") return count_arg(ScriptStep::Kind::wait_hits);
  if (words[0] == "wait-suspended") return count_arg(ScriptStep::Kind::wait_suspended);
  if (words[0] == "wait-exit") {
    if (words.size() != 1) fail(ErrorKind::parse, "wait-exit takes no argument");
    step.kind = ScriptStep::Kind::wait_exit;
    return step;
  }
  auto colon = line.find(':');
  if (colon == std::string_view::npos) fail(ErrorKind::parse, "expected 'all:' or 'rank N:': " + std::string(line));
  auto target = text::split_ws(line.substr(0, colon));
  step.command = std::string(text::trim(line.substr(colon + 1)));
  if (step.command.empty()) fail(ErrorKind::parse, "missing command: " + std::string(line));
  if (target.size() == 1 && target[0] == "all") {
    step.kind = ScriptStep::Kind::all;
    return step;
  }
  if (target.size() == 2 && target[0] == "rank") {
    auto r = text::parse_int(target[1]);
    if (r && *r >= 0) {
      step.kind = ScriptStep::Kind::rank;
      step.rank = static_cast<int>(*r);
      return step;
    }
  }
  fail(ErrorKind::parse, "bad target: " + std::string(line.substr(0, colon)));
}

std::vector<ScriptStep> parse_script(std::string_view text) {
  std::vector<ScriptStep> steps;
  int number = 0;
  for (auto line : text::split(text, '\n')) {
    ++number;
    try {
      if (auto step = parse_step(line)) steps.push_back(std::move(*step));
    } catch (const Error& e) {
      fail(ErrorKind::parse, "line " + std::to_string(number) + ": " + e.what());
    }
  }
  return steps;
}

namespace {

std::string label(int rank) { return "[rank " + std::to_string(rank) + "] "; }

class Runner {
 public:
  Runner(Session& session, ScriptOptions options)
      : session_(session), options_(options), next_seq_(options.first_event) {}

  ScriptResult run(const std::vector<ScriptStep>& steps) {
    if (steps.empty()) return result_;
    for (const auto& step : steps) {
      try {
        execute(step);
      } catch (const Error& e) {
        result_.ok = false;
        result_.error = e.what();
        break;
      }
    }
    flush_events();
    return std::move(result_);
  }

 private:
  void execute(const ScriptStep& step) {
    switch (step.kind) {
      case ScriptStep::Kind::all: {
        for (int r = 0; r < session_.size(); ++r) result_.transcript.push_back(label(r) + "> " + step.command);
        auto replies = session_.broadcast(step.command);
        for (const auto& [r, reply] : replies) append_reply(r, reply);
        break;
      }
      case ScriptStep::Kind::rank:
        if (step.rank >= session_.size()) fail(ErrorKind::argument, "no rank " + std::to_string(step.rank));
        result_.transcript.push_back(label(step.rank) + "> " + step.command);
        append_reply(step.rank, session_.command(step.rank, step.command));
        break;
      case ScriptStep::Kind::wait_hits:
        wait_count("HIT", step.count, hits_consumed_);
        break;
      case ScriptStep::Kind::wait_suspended:
        wait_count("SUSPENDED", step.count, suspended_consumed_);
        break;
      case ScriptStep::Kind::wait_exit: {
        bool done = session_.wait_for(
            [](const auto&, const std::vector<RankView>& mirror) {
              return std::all_of(mirror.begin(), mirror.end(),
                                 [](const RankView& v) { return v.exit_code || !v.connected; });
            },
            options_.wait_timeout);
        flush_events();
        if (!done) fail(ErrorKind::timeout, "wait-exit: ranks still running after timeout");
        for (const auto& v : session_.mirror()) {
          int code = v.exit_code.value_or(-1);
          result_.exit_codes[v.rank] = code;
          result_.transcript.push_back(label(v.rank) + (v.exit_code ? "exit " + std::to_string(code) : "disconnected"));
        }
        break;
      }
    }
  }

  void wait_count(const std::string& kind, int count, std::size_t& consumed) {
    std::size_t target = consumed + static_cast<std::size_t>(count);
    bool done = session_.wait_for(
        [&](const std::vector<EventRecord>& log, const auto&) {
          return static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [&](const EventRecord& e) {
                   return e.seq >= options_.first_event && e.from_agent && e.kind == kind;
                 })) >= target;
        },
        options_.wait_timeout);
    flush_events();
    if (!done) {
      fail(ErrorKind::timeout, "wait-" + std::string(kind == "HIT" ? "hits " : "suspended ") +
                                   std::to_string(count) + ": timed out");
    }
    consumed = target;
  }

  void append_reply(int rank, const Response& reply) {
    for (const auto& l : reply.lines) result_.transcript.push_back(label(rank) + "< " + l);
  }

  void flush_events() {
    auto events = session_.events_since(next_seq_, std::chrono::milliseconds(0));
    if (events.empty()) return;
    next_seq_ = events.back().seq + 1;
    std::stable_sort(events.begin(), events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.rank < b.rank; });
    for (const auto& e : events) {
      if (e.from_agent) result_.transcript.push_back(label(e.rank) + "< " + e.line());
    }
  }

  Session& session_;
  ScriptOptions options_;
  ScriptResult result_;
  std::uint64_t next_seq_;
  std::size_t hits_consumed_ = 0;
  std::size_t suspended_consumed_ = 0;
};

}  // namespace

ScriptResult run_script(Session& session, const std::vector<ScriptStep>& steps, ScriptOptions options) {
  return Runner(session, options).run(steps);
}

}  // namespace mpx::debug
