#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "holon/aggregation.hpp"
#include "holon/holarchy.hpp"

namespace holon {

/// Relation of the sender as seen by the receiver.
enum class MessageKind { FromSubordinate, FromNeighbor, FromSuperior };

struct Message {
  ParamVector payload;
  double weight = 0.0;
  // Origin of the payload. A forwarded superior model keeps its superior as
  // sender and records the forwarding neighbor in forwarded_by.
  HolonId sender;
  MessageKind kind = MessageKind::FromSubordinate;
  // Terminal round for terminal senders, emission sequence otherwise.
  std::uint64_t round_tag = 0;
  // The sender stops after this message.
  bool final = false;
  std::optional<HolonId> forwarded_by;

  /// The holon that physically sent this message.
  HolonId channel() const { return forwarded_by.value_or(sender); }
};

struct Envelope {
  HolonId target;
  Message message;
};

/// How a superior's model enters the receiving holon's aggregation.
enum class SuperiorPolicy {
  // The superior model stands in for the receiver's own B block (its own
  // column for a terminal, the subordinate block for a head) and carries
  // that block's weight. Reproduces FedAvg, HFL and P2P exactly.
  Replace,
  // The superior model is an extra U column weighted by the superior's
  // aggregate data size.
  Weighted,
};

enum class TargetClass { Subordinates, Neighbors, Superiors };

/// Who receives a holon's model after it aggregates (and trains).
struct RoutingPolicy {
  enum class Mode { HoALDefault, Custom };
  Mode mode = Mode::HoALDefault;
  // Custom only.
  std::set<TargetClass> terminal;   // every round
  std::set<TargetClass> guiding;    // non-terminal with local budget left
  std::set<TargetClass> reporting;  // non-terminal with local budget spent

  static RoutingPolicy hoal_default() { return {}; }
  static RoutingPolicy custom(std::set<TargetClass> terminal,
                              std::set<TargetClass> guiding,
                              std::set<TargetClass> reporting);

  const std::set<TargetClass>& terminal_targets() const;
  const std::set<TargetClass>& guiding_targets() const;
  const std::set<TargetClass>& reporting_targets() const;
};

struct RuntimeOptions {
  // Terminal round budget k; a terminal stops once its round exceeds it.
  std::uint64_t budget = 200;
  // Aggregations a non-terminal runs before reporting to its superior.
  std::uint64_t local_budget = 2;
  bool sync_mode = true;
  SuperiorPolicy superior_policy = SuperiorPolicy::Replace;
  RoutingPolicy routing = RoutingPolicy::hoal_default();
};

/// Local training hook for terminals: (model, round) -> trained model.
using TrainFn =
    std::function<ParamVector(const ParamVector& theta, std::uint64_t round)>;

enum class EventKind { Aggregated, Trained };

enum class Phase {
  Idle,            // root before start()
  Collecting,      // waiting on subordinate reports (terminals: every round)
  AwaitSuperior,   // non-terminal that reported upward, or awaits theta0
  Stopped,
};

struct RuntimeEvent {
  HolonId holon;
  EventKind kind;
  // Phase the aggregation ran in (AwaitSuperior means it adopted a
  // superior model).
  Phase phase;
  // Terminal round, or the non-terminal's aggregation count.
  std::uint64_t round;
  ParamVector theta;
};

using EventObserver = std::function<void(const RuntimeEvent&)>;

/// One holon's state machine: receive, aggregate when the expected peers
/// have reported, train (terminals), route, stop. Owned by a single
/// execution unit; not thread-safe.
class HolonRuntime {
 public:
  HolonRuntime(std::shared_ptr<const HolarchySpec> spec, HolonId id,
               RuntimeOptions options, ParamVector theta0, double own_weight,
               TrainFn train = {});

  /// Root only: hands the initial model down (to every subordinate, or to
  /// the first one for an initiator in sync mode). No-op elsewhere.
  std::vector<Envelope> start();

  /// Records msg into the block matching its kind, or queues it if the
  /// sender already has an unconsumed entry. In sync mode a superior's
  /// payload seen for the first time is forwarded to every neighbor.
  /// Throws ProtocolError after stop or on a kind inconsistent with the
  /// holarchy.
  std::vector<Envelope> handle_message(const Message& msg);

  bool ready_to_aggregate() const;

  /// One aggregate / train / share iteration. Returns no messages and
  /// changes nothing when not ready. Throws ProtocolError after stop.
  std::vector<Envelope> step();

  bool stopping() const { return phase_ == Phase::Stopped; }

  /// Targets for the current stage, under options().routing.
  std::set<HolonId> routing_targets() const;
  std::set<HolonId> routing_targets(const RoutingPolicy& policy) const;

  /// Peers whose current entry is required before aggregating.
  std::set<HolonId> expected_senders() const;

  const HolonId& id() const { return id_; }
  bool terminal() const { return terminal_; }
  Phase phase() const { return phase_; }
  std::uint64_t round() const { return round_; }
  std::uint64_t aggregations() const { return aggregations_; }
  std::uint64_t local_rounds() const { return local_rounds_; }
  const ParamVector& theta() const { return theta_; }
  double own_weight() const { return own_weight_; }
  const ContributionState& contributions() const { return contributions_; }
  const std::set<HolonId>& finished_subordinates() const { return finished_; }
  const RuntimeOptions& options() const { return options_; }
  std::size_t queued_messages() const;
  std::uint64_t duplicates_dropped() const { return duplicates_; }

  void set_observer(EventObserver observer) { observer_ = std::move(observer); }

 private:
  struct Slot {
    Block block;
    HolonId sender;
    friend auto operator<=>(const Slot&, const Slot&) = default;
  };

  bool has_active_superior() const;
  bool superior_is_initiator() const;
  std::vector<HolonId> live_subordinates() const;
  std::set<HolonId> resolve(const std::set<TargetClass>& classes) const;
  MessageKind kind_seen_by(const HolonId& target) const;
  bool admissible(const Message& msg) const;
  void record(const Message& msg);
  void promote_pending();
  std::vector<Envelope> advance();
  ParamVector aggregate_current() const;
  void consume_and_advance(Phase phase);
  std::vector<Envelope> emit(const std::set<HolonId>& targets, bool final);
  void notify(EventKind kind, Phase phase, std::uint64_t round) const;

  std::shared_ptr<const HolarchySpec> spec_;
  HolonId id_;
  bool terminal_;
  RuntimeOptions options_;
  ParamVector theta_;
  double own_weight_;
  TrainFn train_;
  EventObserver observer_;

  Phase phase_;
  std::uint64_t round_ = 1;
  std::uint64_t aggregations_ = 0;
  std::uint64_t local_rounds_ = 0;
  std::uint64_t emitted_batches_ = 0;
  std::uint64_t duplicates_ = 0;

  SenderRanks ranks_;
  ContributionState contributions_;
  std::set<Slot> fresh_;
  std::set<HolonId> final_pending_;
  std::map<Slot, std::deque<Message>> pending_;
  std::map<HolonId, std::uint64_t> superior_tags_;
  std::set<HolonId> finished_;
  std::set<HolonId> neighbors_;
  std::set<HolonId> superiors_;
};

Block block_for(MessageKind kind);

}  // namespace holon
