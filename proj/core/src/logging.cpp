#include "metarl/logging.hpp"

namespace metarl {

std::atomic<std::uint64_t> EventCounters::action_clips{0};
std::atomic<std::uint64_t> EventCounters::sigma_floors{0};
std::atomic<std::uint64_t> EventCounters::prior_fallbacks{0};
std::atomic<std::uint64_t> EventCounters::tasks_skipped{0};

}  // namespace metarl
