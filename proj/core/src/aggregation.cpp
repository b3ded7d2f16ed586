#include "holon/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "holon/error.hpp"

namespace holon {

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("max_abs_diff: sizes " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  return worst;
}

SenderRanks declaration_ranks(const HolarchySpec& spec) {
  auto ranks = std::make_shared<std::map<HolonId, std::size_t>>();
  const auto& order = spec.declaration_order();
  for (std::size_t i = 0; i < order.size(); ++i) (*ranks)[order[i]] = i;
  return ranks;
}

bool ContributionState::before(const HolonId& a, const HolonId& b) const {
  if (ranks_) {
    auto ra = ranks_->find(a);
    auto rb = ranks_->find(b);
    bool ka = ra != ranks_->end();
    bool kb = rb != ranks_->end();
    if (ka && kb) return ra->second < rb->second;
    if (ka != kb) return ka;
  }
  return a < b;
}

void ContributionState::record(Block block, const HolonId& sender,
                               ParamVector theta, double weight) {
  if (theta.size() != dim_) {
    throw DimensionError("contribution from " + to_string(sender) + " has " +
                         std::to_string(theta.size()) +
                         " parameters, expected " + std::to_string(dim_));
  }
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw DimensionError("contribution from " + to_string(sender) +
                         " has non-positive weight " + std::to_string(weight));
  }
  if (!theta.all_finite()) {
    throw DimensionError("contribution from " + to_string(sender) +
                         " has non-finite parameters");
  }
  auto& cols = blocks_[static_cast<std::size_t>(block)];
  auto it = std::find_if(cols.begin(), cols.end(), [&](const Contribution& c) {
    return c.sender == sender;
  });
  if (it != cols.end()) {
    it->theta = std::move(theta);
    it->weight = weight;
    return;
  }
  auto pos = std::find_if(cols.begin(), cols.end(), [&](const Contribution& c) {
    return before(sender, c.sender);
  });
  cols.insert(pos, Contribution{sender, std::move(theta), weight});
}

bool ContributionState::has(Block b, const HolonId& sender) const {
  const auto& cols = block(b);
  return std::any_of(cols.begin(), cols.end(), [&](const Contribution& c) {
    return c.sender == sender;
  });
}

void ContributionState::clear_all() {
  for (auto& b : blocks_) b.clear();
}

bool ContributionState::empty() const { return columns() == 0; }

std::size_t ContributionState::columns() const {
  return blocks_[0].size() + blocks_[1].size() + blocks_[2].size();
}

AssembledContribution::AssembledContribution(std::size_t dim,
                                             std::vector<double> column_major,
                                             std::vector<double> weights)
    : dim_(dim), theta_(std::move(column_major)), weights_(std::move(weights)) {
  if (theta_.size() != dim_ * weights_.size()) {
    throw DimensionError("contribution matrix has " +
                         std::to_string(theta_.size()) + " entries for " +
                         std::to_string(weights_.size()) + " columns of " +
                         std::to_string(dim_));
  }
}

AssembledContribution assemble(const ContributionState& state) {
  if (state.empty()) {
    throw ProtocolError("cannot assemble an empty contribution state");
  }
  std::vector<double> theta;
  std::vector<double> weights;
  std::vector<HolonId> senders;
  theta.reserve(state.dim() * state.columns());
  std::array<std::size_t, 3> sizes{};
  for (auto b : {Block::Subordinate, Block::Neighbor, Block::Superior}) {
    const auto& cols = state.block(b);
    sizes[static_cast<std::size_t>(b)] = cols.size();
    for (const auto& c : cols) {
      theta.insert(theta.end(), c.theta.begin(), c.theta.end());
      weights.push_back(c.weight);
      senders.push_back(c.sender);
    }
  }
  AssembledContribution ac(state.dim(), std::move(theta), std::move(weights));
  ac.block_sizes = sizes;
  ac.senders = std::move(senders);
  return ac;
}

ParamVector weighted_average(const AssembledContribution& ac) {
  if (ac.columns() == 0) {
    throw ProtocolError("weighted average over zero columns");
  }
  double total = 0.0;
  for (double w : ac.weights()) {
    if (!(w > 0.0)) {
      throw ProtocolError("weighted average with non-positive weight " +
                          std::to_string(w));
    }
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ProtocolError("weighted average with total weight " +
                        std::to_string(total));
  }
  ParamVector out(ac.dim(), 0.0);
  for (std::size_t j = 0; j < ac.columns(); ++j) {
    const double p = ac.weights()[j] / total;
    auto col = ac.column(j);
    for (std::size_t k = 0; k < ac.dim(); ++k) out[k] += p * col[k];
  }
  return out;
}

}  // namespace holon
