#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace cmkerr {

/// Environment variable consulted when no worker count is given explicitly.
inline constexpr const char* kWorkersEnv = "CMKERR_WORKERS";

/// Explicit value wins, then CMKERR_WORKERS, then hardware concurrency (>= 1).
/// Throws UsageError for a malformed or zero environment value.
unsigned resolve_workers(std::optional<unsigned> requested = std::nullopt);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; the first exception is rethrown after all threads join.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace cmkerr
