#include "holon/scheduler.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "holon/error.hpp"

namespace holon {

namespace {

std::map<HolonId, std::size_t> index_by_id(
    const std::vector<HolonRuntime>& holons) {
  std::map<HolonId, std::size_t> index;
  for (std::size_t i = 0; i < holons.size(); ++i) index[holons[i].id()] = i;
  return index;
}

std::size_t lookup(const std::map<HolonId, std::size_t>& index,
                   const HolonId& id) {
  auto it = index.find(id);
  if (it == index.end()) {
    throw ProtocolError("message addressed to unknown holon " + to_string(id));
  }
  return it->second;
}

}  // namespace

SchedulerStats run_deterministic(std::vector<HolonRuntime>& holons,
                                 const DeterministicOptions& options) {
  SchedulerStats stats;
  const auto index = index_by_id(holons);
  std::deque<Envelope> queue;
  std::uint64_t events = 0;

  auto enqueue = [&](std::vector<Envelope> out, bool was_stopped) {
    if (was_stopped) stats.emitted_after_stop += out.size();
    stats.emitted += out.size();
    for (auto& env : out) queue.push_back(std::move(env));
  };

  for (auto& h : holons) enqueue(h.start(), false);

  auto all_stopped = [&holons] {
    for (const auto& h : holons) {
      if (!h.stopping()) return false;
    }
    return true;
  };

  while (true) {
    bool progressed = false;
    while (!queue.empty()) {
      Envelope env = std::move(queue.front());
      queue.pop_front();
      ++stats.delivered;
      ++events;
      progressed = true;
      auto& target = holons[lookup(index, env.target)];
      if (target.stopping()) {
        ++stats.discarded_after_stop;
        continue;
      }
      enqueue(target.handle_message(env.message), false);
    }
    for (auto& h : holons) {
      if (h.stopping() || !h.ready_to_aggregate()) continue;
      enqueue(h.step(), false);
      ++stats.steps;
      ++events;
      progressed = true;
    }
    if (queue.empty() && all_stopped()) {
      stats.terminated = true;
      break;
    }
    if (!progressed) {
      stats.failure = "deadlock: no deliverable message and no ready holon";
      break;
    }
    if (events > options.max_events) {
      stats.failure = "watchdog: event limit exceeded";
      break;
    }
  }
  for (const auto& h : holons) stats.duplicates_dropped += h.duplicates_dropped();
  return stats;
}

namespace {

struct Mailbox {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Message> queue;
  bool closed = false;
};

}  // namespace

SchedulerStats run_concurrent(std::vector<HolonRuntime>& holons,
                              const ConcurrentOptions& options) {
  const auto index = index_by_id(holons);
  std::vector<Mailbox> boxes(holons.size());
  std::atomic<std::uint64_t> emitted{0};
  std::atomic<std::uint64_t> delivered{0};
  std::atomic<std::uint64_t> discarded{0};
  std::atomic<std::uint64_t> steps{0};
  std::vector<std::exception_ptr> errors(holons.size());
  std::vector<std::string> failures(holons.size());

  auto post = [&](std::vector<Envelope> out) {
    emitted += out.size();
    for (auto& env : out) {
      auto& box = boxes[lookup(index, env.target)];
      std::lock_guard lock(box.mutex);
      if (box.closed) {
        ++delivered;
        ++discarded;
        continue;
      }
      box.queue.push_back(std::move(env.message));
      box.cv.notify_one();
    }
  };

  auto body = [&](std::size_t i) {
    auto& h = holons[i];
    auto& box = boxes[i];
    try {
      post(h.start());
      while (!h.stopping()) {
        while (!h.stopping() && h.ready_to_aggregate()) {
          post(h.step());
          ++steps;
        }
        if (h.stopping()) break;
        Message msg;
        {
          std::unique_lock lock(box.mutex);
          if (!box.cv.wait_for(lock, options.idle_timeout,
                               [&box] { return !box.queue.empty(); })) {
            failures[i] = "holon " + to_string(h.id()) + " timed out";
            break;
          }
          msg = std::move(box.queue.front());
          box.queue.pop_front();
        }
        ++delivered;
        post(h.handle_message(msg));
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
    std::lock_guard lock(box.mutex);
    box.closed = true;
    delivered += box.queue.size();
    discarded += box.queue.size();
    box.queue.clear();
  };

  std::vector<std::thread> threads;
  threads.reserve(holons.size());
  for (std::size_t i = 0; i < holons.size(); ++i) threads.emplace_back(body, i);
  for (auto& t : threads) t.join();

  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SchedulerStats stats;
  stats.emitted = emitted;
  stats.delivered = delivered;
  stats.discarded_after_stop = discarded;
  stats.steps = steps;
  stats.terminated = true;
  for (const auto& h : holons) {
    stats.duplicates_dropped += h.duplicates_dropped();
    if (!h.stopping()) stats.terminated = false;
  }
  for (const auto& f : failures) {
    if (!f.empty()) {
      stats.terminated = false;
      if (stats.failure.empty()) stats.failure = f;
    }
  }
  return stats;
}

}  // namespace holon
