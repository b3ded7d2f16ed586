#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "holon/holarchy.hpp"

namespace holon {

/// A flat model parameter vector; the unit every holon exchanges.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0)
      : values_(dim, fill) {}
  explicit ParamVector(std::vector<double> values)
      : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  const std::vector<double>& values() const { return values_; }

  bool all_finite() const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

/// Largest per-coordinate absolute difference. Throws on size mismatch.
double max_abs_diff(const ParamVector& a, const ParamVector& b);

/// The three sources of a holon's contribution matrix, in concatenation
/// order: subordinates (or the terminal itself), neighbors, superiors.
enum class Block : std::size_t { Subordinate = 0, Neighbor = 1, Superior = 2 };

struct Contribution {
  HolonId sender;
  ParamVector theta;
  double weight = 0.0;
};

/// Ranks senders within a block. Senders missing from the map sort after
/// ranked ones, by HolonId.
using SenderRanks = std::shared_ptr<const std::map<HolonId, std::size_t>>;

SenderRanks declaration_ranks(const HolarchySpec& spec);

/// Per-holon received contributions. At most one column per sender per
/// block; a newer update from the same sender replaces the older one.
class ContributionState {
 public:
  explicit ContributionState(std::size_t dim, SenderRanks ranks = nullptr)
      : dim_(dim), ranks_(std::move(ranks)) {}

  /// Inserts or replaces sender's column in block. Throws DimensionError on
  /// a size mismatch, non-finite entries or a non-positive weight.
  void record(Block block, const HolonId& sender, ParamVector theta,
              double weight);

  const std::vector<Contribution>& block(Block b) const {
    return blocks_[static_cast<std::size_t>(b)];
  }
  bool has(Block b, const HolonId& sender) const;
  void clear(Block b) { blocks_[static_cast<std::size_t>(b)].clear(); }
  void clear_all();

  bool empty() const;
  std::size_t columns() const;
  std::size_t dim() const { return dim_; }

 private:
  bool before(const HolonId& a, const HolonId& b) const;

  std::size_t dim_;
  SenderRanks ranks_;
  std::array<std::vector<Contribution>, 3> blocks_;
};

/// Concatenated contribution matrix [B|N|U] and weight vector.
class AssembledContribution {
 public:
  AssembledContribution(std::size_t dim, std::vector<double> column_major,
                        std::vector<double> weights);

  std::size_t dim() const { return dim_; }
  std::size_t columns() const { return weights_.size(); }
  std::span<const double> column(std::size_t j) const {
    return std::span<const double>(theta_).subspan(j * dim_, dim_);
  }
  const std::vector<double>& weights() const { return weights_; }
  /// Number of columns contributed by each block, in B, N, U order.
  std::array<std::size_t, 3> block_sizes{};
  /// Sender of each column.
  std::vector<HolonId> senders;

 private:
  std::size_t dim_;
  std::vector<double> theta_;
  std::vector<double> weights_;
};

/// Builds [B|N|U]. Throws ProtocolError when every block is empty.
AssembledContribution assemble(const ContributionState& state);

/// Size-weighted average (Theta * W) / (W^T 1). Columns are accumulated in
/// order with normalized weights, so a single column is returned unchanged.
ParamVector weighted_average(const AssembledContribution& ac);

/// Pluggable aggregation rule. Only weighted_average ships.
using Aggregator = std::function<ParamVector(const AssembledContribution&)>;

}  // namespace holon
