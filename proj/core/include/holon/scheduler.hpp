#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "holon/protocol.hpp"

namespace holon {

enum class ExecutionMode { Deterministic, Concurrent };

struct SchedulerStats {
  std::uint64_t emitted = 0;
  // Every emitted message is delivered exactly once, either handled or
  // discarded because its target had already stopped.
  std::uint64_t delivered = 0;
  std::uint64_t discarded_after_stop = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t steps = 0;
  // Messages returned by a holon that was already stopped. Always 0 unless
  // the runtime is broken.
  std::uint64_t emitted_after_stop = 0;
  bool terminated = false;
  std::string failure;
};

struct DeterministicOptions {
  // Watchdog: deliveries plus steps before the run is declared stuck.
  std::uint64_t max_events = 50'000'000;
};

/// Single-threaded scheduler: one global FIFO of messages (causal order),
/// and round-robin sweeps over holons in the given order. Bit-reproducible.
/// Never throws for liveness failures; check stats.terminated.
SchedulerStats run_deterministic(std::vector<HolonRuntime>& holons,
                                 const DeterministicOptions& options = {});

struct ConcurrentOptions {
  // A holon idle for this long without being able to progress fails the run.
  std::chrono::milliseconds idle_timeout{30'000};
};

/// One thread per holon, one FIFO mailbox per holon. Per-sender order is
/// preserved. Exceptions from a holon are rethrown after every thread
/// has joined.
SchedulerStats run_concurrent(std::vector<HolonRuntime>& holons,
                              const ConcurrentOptions& options = {});

}  // namespace holon
