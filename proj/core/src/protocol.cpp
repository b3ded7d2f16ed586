#include "holon/protocol.hpp"

#include <algorithm>
#include <iterator>

#include "holon/error.hpp"

namespace holon {

Block block_for(MessageKind kind) {
  switch (kind) {
    case MessageKind::FromSubordinate:
      return Block::Subordinate;
    case MessageKind::FromNeighbor:
      return Block::Neighbor;
    case MessageKind::FromSuperior:
      return Block::Superior;
  }
  return Block::Subordinate;
}

namespace {

const std::set<TargetClass> kDefaultTerminal{TargetClass::Neighbors,
                                             TargetClass::Superiors};
const std::set<TargetClass> kDefaultGuiding{TargetClass::Subordinates};
const std::set<TargetClass> kDefaultReporting{TargetClass::Superiors};

}  // namespace

RoutingPolicy RoutingPolicy::custom(std::set<TargetClass> terminal,
                                    std::set<TargetClass> guiding,
                                    std::set<TargetClass> reporting) {
  RoutingPolicy p;
  p.mode = Mode::Custom;
  p.terminal = std::move(terminal);
  p.guiding = std::move(guiding);
  p.reporting = std::move(reporting);
  return p;
}

const std::set<TargetClass>& RoutingPolicy::terminal_targets() const {
  return mode == Mode::HoALDefault ? kDefaultTerminal : terminal;
}
const std::set<TargetClass>& RoutingPolicy::guiding_targets() const {
  return mode == Mode::HoALDefault ? kDefaultGuiding : guiding;
}
const std::set<TargetClass>& RoutingPolicy::reporting_targets() const {
  return mode == Mode::HoALDefault ? kDefaultReporting : reporting;
}

HolonRuntime::HolonRuntime(std::shared_ptr<const HolarchySpec> spec,
                           HolonId id, RuntimeOptions options,
                           ParamVector theta0, double own_weight,
                           TrainFn train)
    : spec_(std::move(spec)),
      id_(id),
      terminal_(spec_->record(id).terminal()),
      options_(std::move(options)),
      theta_(std::move(theta0)),
      own_weight_(own_weight),
      train_(std::move(train)),
      phase_(Phase::Collecting),
      ranks_(declaration_ranks(*spec_)),
      contributions_(theta_.size(), ranks_) {
  if (!(own_weight_ > 0.0)) {
    throw ProtocolError("holon " + to_string(id_) +
                        " needs a positive data weight");
  }
  if (terminal_ && options_.budget == 0) {
    throw ProtocolError("terminal round budget must be >= 1");
  }
  if (!terminal_ && options_.local_budget == 0) {
    throw ProtocolError("non-terminal local budget must be >= 1");
  }
  superiors_ = spec_->superiors(id_);
  if (!superiors_.empty()) neighbors_ = spec_->neighbors(id_);

  if (terminal_) {
    contributions_.record(Block::Subordinate, id_, theta_, own_weight_);
  } else {
    phase_ = superiors_.empty() ? Phase::Idle : Phase::AwaitSuperior;
  }
}

bool HolonRuntime::superior_is_initiator() const {
  return !superiors_.empty() &&
         spec_->record(*superiors_.begin()).initiator;
}

bool HolonRuntime::has_active_superior() const {
  return !superiors_.empty() && !superior_is_initiator();
}

std::vector<HolonId> HolonRuntime::live_subordinates() const {
  std::vector<HolonId> out;
  for (const auto& s : spec_->subordinates(id_)) {
    if (!finished_.contains(s)) out.push_back(s);
  }
  return out;
}

std::set<HolonId> HolonRuntime::resolve(
    const std::set<TargetClass>& classes) const {
  std::set<HolonId> out;
  if (classes.contains(TargetClass::Subordinates)) {
    for (const auto& s : live_subordinates()) out.insert(s);
  }
  if (classes.contains(TargetClass::Neighbors)) {
    for (const auto& n : neighbors_) {
      if (!finished_.contains(n)) out.insert(n);
    }
  }
  if (classes.contains(TargetClass::Superiors) && has_active_superior()) {
    out.insert(superiors_.begin(), superiors_.end());
  }
  return out;
}

std::set<HolonId> HolonRuntime::routing_targets() const {
  return routing_targets(options_.routing);
}

std::set<HolonId> HolonRuntime::routing_targets(
    const RoutingPolicy& policy) const {
  if (terminal_) return resolve(policy.terminal_targets());
  if (has_active_superior() && local_rounds_ >= options_.local_budget) {
    return resolve(policy.reporting_targets());
  }
  return resolve(policy.guiding_targets());
}

std::set<HolonId> HolonRuntime::expected_senders() const {
  std::set<HolonId> out;
  const auto& routing = options_.routing;
  switch (phase_) {
    case Phase::Idle:
    case Phase::Stopped:
      return out;
    case Phase::AwaitSuperior:
      return superiors_;
    case Phase::Collecting:
      break;
  }
  if (terminal_) {
    if (!superiors_.empty()) {
      const bool guided =
          has_active_superior() &&
          routing.guiding_targets().contains(TargetClass::Subordinates);
      if (round_ == 1 || guided) out.insert(*superiors_.begin());
    }
    if (round_ >= 2 &&
        routing.terminal_targets().contains(TargetClass::Neighbors)) {
      for (const auto& n : neighbors_) {
        if (!finished_.contains(n)) out.insert(n);
      }
    }
    return out;
  }
  for (const auto& s : live_subordinates()) {
    const bool reports =
        spec_->record(s).terminal()
            ? routing.terminal_targets().contains(TargetClass::Superiors)
            : routing.reporting_targets().contains(TargetClass::Superiors);
    if (reports) out.insert(s);
  }
  return out;
}

bool HolonRuntime::ready_to_aggregate() const {
  if (phase_ == Phase::Idle || phase_ == Phase::Stopped) return false;
  for (const auto& peer : expected_senders()) {
    Block block = Block::Neighbor;
    if (superiors_.contains(peer)) {
      block = Block::Superior;
    } else if (!terminal_) {
      block = Block::Subordinate;
    }
    if (!fresh_.contains(Slot{block, peer})) return false;
  }
  return true;
}

std::size_t HolonRuntime::queued_messages() const {
  std::size_t n = 0;
  for (const auto& [slot, q] : pending_) n += q.size();
  return n;
}

MessageKind HolonRuntime::kind_seen_by(const HolonId& target) const {
  if (superiors_.contains(target)) return MessageKind::FromSubordinate;
  const auto& subs = spec_->subordinates(id_);
  if (std::find(subs.begin(), subs.end(), target) != subs.end()) {
    return MessageKind::FromSuperior;
  }
  return MessageKind::FromNeighbor;
}

bool HolonRuntime::admissible(const Message& msg) const {
  // A terminal neighbor's round-r model belongs to this terminal's round r+1.
  return !(terminal_ && msg.kind == MessageKind::FromNeighbor &&
           spec_->record(msg.sender).terminal() && msg.round_tag >= round_);
}

void HolonRuntime::record(const Message& msg) {
  Slot slot{block_for(msg.kind), msg.sender};
  if (fresh_.contains(slot) || !admissible(msg)) {
    pending_[slot].push_back(msg);
    return;
  }
  contributions_.record(slot.block, msg.sender, msg.payload, msg.weight);
  fresh_.insert(slot);
  if (msg.final) final_pending_.insert(msg.sender);
}

std::vector<Envelope> HolonRuntime::start() {
  if (!superiors_.empty() || phase_ != Phase::Idle) return {};
  const auto& subs = spec_->subordinates(id_);
  std::set<HolonId> targets;
  if (spec_->record(id_).initiator) {
    if (options_.sync_mode) {
      targets.insert(subs.front());
    } else {
      targets.insert(subs.begin(), subs.end());
    }
    auto out = emit(targets, false);
    phase_ = Phase::Stopped;
    return out;
  }
  targets.insert(subs.begin(), subs.end());
  phase_ = Phase::Collecting;
  return emit(targets, false);
}

std::vector<Envelope> HolonRuntime::handle_message(const Message& msg) {
  if (phase_ == Phase::Stopped) {
    throw ProtocolError("holon " + to_string(id_) +
                        " received a message after stopping");
  }
  bool consistent = false;
  switch (msg.kind) {
    case MessageKind::FromSubordinate: {
      const auto& subs = spec_->subordinates(id_);
      consistent = !msg.forwarded_by &&
                   std::find(subs.begin(), subs.end(), msg.sender) != subs.end();
      break;
    }
    case MessageKind::FromNeighbor:
      consistent = !msg.forwarded_by && neighbors_.contains(msg.sender);
      break;
    case MessageKind::FromSuperior:
      consistent = superiors_.contains(msg.sender) &&
                   (!msg.forwarded_by || neighbors_.contains(*msg.forwarded_by));
      break;
  }
  if (!consistent) {
    throw ProtocolError("holon " + to_string(id_) +
                        ": message kind inconsistent with sender " +
                        to_string(msg.sender));
  }

  std::vector<Envelope> out;
  if (msg.kind == MessageKind::FromSuperior) {
    auto seen = superior_tags_.find(msg.sender);
    if (seen != superior_tags_.end() && msg.round_tag <= seen->second) {
      ++duplicates_;
      return out;
    }
    superior_tags_[msg.sender] = msg.round_tag;
    if (options_.sync_mode) {
      for (const auto& n : neighbors_) {
        Message copy = msg;
        copy.forwarded_by = id_;
        out.push_back({n, std::move(copy)});
      }
    }
  }
  record(msg);
  return out;
}

ParamVector HolonRuntime::aggregate_current() const {
  const auto& sup = contributions_.block(Block::Superior);
  const bool stand_in =
      options_.superior_policy == SuperiorPolicy::Replace && !sup.empty() &&
      (terminal_ || phase_ == Phase::AwaitSuperior);

  ContributionState view(contributions_.dim(), ranks_);
  if (stand_in) {
    view.record(Block::Subordinate, id_, sup.front().theta, own_weight_);
  } else {
    for (const auto& c : contributions_.block(Block::Subordinate)) {
      view.record(Block::Subordinate, c.sender, c.theta, c.weight);
    }
    for (const auto& c : sup) {
      view.record(Block::Superior, c.sender, c.theta, c.weight);
    }
  }
  for (const auto& c : contributions_.block(Block::Neighbor)) {
    view.record(Block::Neighbor, c.sender, c.theta, c.weight);
  }
  if (view.empty()) return theta_;
  return weighted_average(assemble(view));
}

void HolonRuntime::consume_and_advance(Phase phase) {
  // A head adopting its superior's model leaves early subordinate reports
  // unconsumed.
  const bool keep_subordinates = !terminal_ && phase == Phase::AwaitSuperior;
  for (const auto& sender : final_pending_) {
    if (keep_subordinates && !superiors_.contains(sender) &&
        !neighbors_.contains(sender)) {
      continue;
    }
    finished_.insert(sender);
  }
  std::erase_if(final_pending_, [this](const HolonId& h) {
    return finished_.contains(h);
  });
  contributions_.clear(Block::Neighbor);
  contributions_.clear(Block::Superior);
  std::erase_if(fresh_, [keep_subordinates](const Slot& slot) {
    return !(keep_subordinates && slot.block == Block::Subordinate);
  });
}

void HolonRuntime::promote_pending() {
  for (auto it = pending_.begin(); it != pending_.end();) {
    auto& queue = it->second;
    if (!queue.empty() && !fresh_.contains(it->first) &&
        admissible(queue.front())) {
      Message next = std::move(queue.front());
      queue.pop_front();
      contributions_.record(it->first.block, next.sender, next.payload,
                            next.weight);
      fresh_.insert(it->first);
      if (next.final) final_pending_.insert(next.sender);
    }
    it = queue.empty() ? pending_.erase(it) : std::next(it);
  }
}

std::vector<Envelope> HolonRuntime::emit(const std::set<HolonId>& targets,
                                         bool final) {
  ++emitted_batches_;
  const std::uint64_t tag = terminal_ ? round_ : emitted_batches_;
  std::vector<Envelope> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    Message m;
    m.payload = theta_;
    m.weight = own_weight_;
    m.sender = id_;
    m.kind = kind_seen_by(t);
    m.round_tag = tag;
    m.final = final;
    out.push_back({t, std::move(m)});
  }
  return out;
}

void HolonRuntime::notify(EventKind kind, Phase phase,
                          std::uint64_t round) const {
  if (observer_) observer_(RuntimeEvent{id_, kind, phase, round, theta_});
}

std::vector<Envelope> HolonRuntime::step() {
  if (phase_ == Phase::Stopped) {
    throw ProtocolError("holon " + to_string(id_) + " stepped after stopping");
  }
  if (!ready_to_aggregate()) return {};
  auto out = advance();
  if (phase_ != Phase::Stopped) promote_pending();
  return out;
}

std::vector<Envelope> HolonRuntime::advance() {

  const Phase phase = phase_;
  theta_ = aggregate_current();
  ++aggregations_;
  notify(EventKind::Aggregated, phase, terminal_ ? round_ : aggregations_);

  if (!terminal_ && phase == Phase::Collecting) {
    const auto& subs = contributions_.block(Block::Subordinate);
    if (subs.size() == spec_->subordinates(id_).size()) {
      double total = 0.0;
      for (const auto& c : subs) total += c.weight;
      own_weight_ = total;
    }
  }
  consume_and_advance(phase);

  if (terminal_) {
    if (train_) theta_ = train_(theta_, round_);
    contributions_.clear(Block::Subordinate);
    contributions_.record(Block::Subordinate, id_, theta_, own_weight_);
    notify(EventKind::Trained, phase, round_);
    const bool final = round_ >= options_.budget;
    auto out = emit(routing_targets(), final);
    ++round_;
    if (round_ > options_.budget) phase_ = Phase::Stopped;
    return out;
  }

  if (phase == Phase::AwaitSuperior) {
    local_rounds_ = 0;
    phase_ = Phase::Collecting;
    return emit(routing_targets(), false);
  }

  ++local_rounds_;
  if (live_subordinates().empty()) {
    auto out = emit(resolve(options_.routing.reporting_targets()), true);
    phase_ = Phase::Stopped;
    return out;
  }
  const bool reporting =
      has_active_superior() && local_rounds_ >= options_.local_budget;
  auto targets = routing_targets();
  if (reporting) {
    if (std::any_of(targets.begin(), targets.end(),
                    [this](const HolonId& t) { return superiors_.contains(t); })) {
      phase_ = Phase::AwaitSuperior;
    } else {
      local_rounds_ = 0;
    }
  }
  return emit(targets, false);
}

}  // namespace holon
