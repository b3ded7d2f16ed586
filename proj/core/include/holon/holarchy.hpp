#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace holon {

/// Position of a holon in the holarchy: level 0 is the root, indices start
/// at 1 within each level.
struct HolonId {
  std::uint32_t level = 0;
  std::uint32_t index = 1;

  friend auto operator<=>(const HolonId&, const HolonId&) = default;
};

/// "level.index", the form used in config files and logs.
std::string to_string(const HolonId& id);

enum class HolonKind { Terminal, NonTerminal };

struct HolonRecord {
  HolonId id;
  HolonKind kind = HolonKind::Terminal;
  std::optional<HolonId> parent;
  // Declaration order; drives column order during aggregation.
  std::vector<HolonId> children;
  // Terminals only: which dataset shard the holon owns.
  std::optional<std::string> dataset_ref;
  // Non-terminals only: the holon hands out the initial model and then
  // takes no further part (the inert root of peer-to-peer setups).
  bool initiator = false;

  bool terminal() const { return kind == HolonKind::Terminal; }

  friend bool operator==(const HolonRecord&, const HolonRecord&) = default;
};

using Edge = std::pair<HolonId, HolonId>;

/// Peer links between the children of one non-terminal holon.
struct CommunicationGraph {
  HolonId owner;
  std::vector<Edge> edges;

  friend bool operator==(const CommunicationGraph&,
                         const CommunicationGraph&) = default;
};

enum class ViolationKind {
  RootMissing,
  MultipleRoots,
  KindMismatch,
  DatasetMismatch,
  InitiatorOnTerminal,
  MultipleParents,
  Orphan,
  DanglingReference,
  LevelMismatch,
  MembershipMismatch,
  MissingGraph,
  GraphOnTerminal,
  CrossHolonEdge,
  SelfLoop,
  DuplicateEdge,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

/// The static multi-level structure. Plain data: it can hold an invalid
/// structure, which validate() reports. The query methods assume the
/// structure is valid.
class HolarchySpec {
 public:
  HolarchySpec() = default;

  /// Appends a record. Declaration order is preserved. Throws TopologyError
  /// if the id is already present.
  void add(HolonRecord record);

  /// Inserts or replaces the graph owned by graph.owner.
  void set_graph(CommunicationGraph graph);

  void set_root(HolonId root) { root_ = root; }

  /// Builds children lists from parent links and creates empty graphs for
  /// non-terminals that lack one. Used by builders and the parser.
  void link_children();

  const std::optional<HolonId>& root_id() const { return root_; }
  HolonId root() const;

  bool contains(const HolonId& id) const { return records_.contains(id); }
  const HolonRecord& record(const HolonId& id) const;
  HolonRecord& mutable_record(const HolonId& id);
  const std::map<HolonId, HolonRecord>& records() const { return records_; }
  const std::map<HolonId, CommunicationGraph>& graphs() const {
    return graphs_;
  }
  const CommunicationGraph* graph(const HolonId& owner) const;

  /// Records in declaration order.
  const std::vector<HolonId>& declaration_order() const { return order_; }
  /// Position of id in declaration order.
  std::size_t rank(const HolonId& id) const;

  std::size_t size() const { return records_.size(); }
  std::vector<HolonId> terminals() const;
  std::vector<HolonId> non_terminals() const;
  /// Number of distinct levels below the root (1 for a flat FedAvg tree).
  std::uint32_t depth() const;

  std::set<HolonId> superiors(const HolonId& id) const;
  const std::vector<HolonId>& subordinates(const HolonId& id) const;
  /// Siblings adjacent to id in its parent's graph. Throws for the root.
  std::set<HolonId> neighbors(const HolonId& id) const;

  friend bool operator==(const HolarchySpec&, const HolarchySpec&) = default;

 private:
  std::map<HolonId, HolonRecord> records_;
  std::map<HolonId, CommunicationGraph> graphs_;
  std::vector<HolonId> order_;
  std::optional<HolonId> root_;
};

/// All structural violations; empty means the structure is well formed.
std::vector<Violation> validate(const HolarchySpec& spec);

/// Recursive data size: a terminal's own sample count, a non-terminal's sum
/// over its subordinates.
std::size_t aggregate_data_size(
    const HolarchySpec& spec, const HolonId& id,
    const std::map<HolonId, std::size_t>& terminal_sizes);

/// Line-oriented config format:
///
///   # comment
///   holon <level>.<index> terminal|nonterminal [parent=<l>.<i>]
///         [data=<ref>] [initiator]
///   graph <level>.<index> [<l>.<i>-<l>.<i> ...]
///
/// One declaration per line. The holon at level 0 is the root. Holons may
/// be referenced as parents before they are declared. A non-terminal
/// without a graph line gets an empty graph.
HolarchySpec parse_holarchy(std::string_view text);

HolarchySpec load_holarchy(const std::string& path);

/// Canonical text for spec, accepted by parse_holarchy.
std::string to_config_text(const HolarchySpec& spec);

HolonId parse_holon_id(std::string_view text);

}  // namespace holon
