#pragma once

#include <functional>

#include "mpx/harness/context.hpp"

namespace mpx {

using RankMain = std::function<int(CommContext&)>;

/// Entry point for programs started by mpxrun.
///
/// Reads MPX_* variables, enables the profiler and debug agent when asked,
/// and runs `rank_main` once per rank: on `size` threads in multicore mode,
/// on the calling thread in cluster mode. Profiles are flushed after every
/// rank has returned. Returns the first nonzero rank result, else 0.
int run(const RankMain& rank_main);

/// Same, with an explicit environment (MPX_DEBUG_*/MPX_PROF* still come from
/// the process environment).
int run(const Environment& env, const RankMain& rank_main);

}  // namespace mpx
