#pragma once

#include <atomic>
#include <cstdint>

namespace metarl {

/// Process-wide event counters for conditions the contracts require to be
/// logged (action clipping, Gaussian-factor sigma floors, prior fallbacks,
/// skipped tasks). Counters keep environment stepping and encoding pure.
struct EventCounters {
  static std::atomic<std::uint64_t> action_clips;
  static std::atomic<std::uint64_t> sigma_floors;
  static std::atomic<std::uint64_t> prior_fallbacks;
  static std::atomic<std::uint64_t> tasks_skipped;

  static void reset() {
    action_clips = 0;
    sigma_floors = 0;
    prior_fallbacks = 0;
    tasks_skipped = 0;
  }
};

}  // namespace metarl
