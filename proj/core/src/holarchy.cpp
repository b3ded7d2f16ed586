#include "holon/holarchy.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "holon/error.hpp"

namespace holon {

std::string to_string(const HolonId& id) {
  return std::to_string(id.level) + "." + std::to_string(id.index);
}

namespace {

std::optional<std::uint32_t> parse_uint(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::optional<HolonId> try_parse_id(std::string_view s) {
  auto dot = s.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  auto level = parse_uint(s.substr(0, dot));
  auto index = parse_uint(s.substr(dot + 1));
  if (!level || !index || *index == 0) return std::nullopt;
  return HolonId{*level, *index};
}

Edge normalized(const Edge& e) {
  return e.first < e.second ? e : Edge{e.second, e.first};
}

}  // namespace

HolonId parse_holon_id(std::string_view text) {
  auto id = try_parse_id(text);
  if (!id) {
    throw TopologyError("malformed holon id '" + std::string(text) + "'");
  }
  return *id;
}

void HolarchySpec::add(HolonRecord record) {
  auto id = record.id;
  if (records_.contains(id)) {
    throw TopologyError("duplicate holon " + to_string(id));
  }
  records_.emplace(id, std::move(record));
  order_.push_back(id);
}

void HolarchySpec::set_graph(CommunicationGraph graph) {
  auto owner = graph.owner;
  graphs_.insert_or_assign(owner, std::move(graph));
}

void HolarchySpec::link_children() {
  for (auto& [id, rec] : records_) rec.children.clear();
  for (const auto& id : order_) {
    const auto& rec = records_.at(id);
    if (!rec.parent) continue;
    auto parent = records_.find(*rec.parent);
    if (parent == records_.end()) {
      throw TopologyError("holon " + to_string(id) +
                          " references missing parent " +
                          to_string(*rec.parent));
    }
    parent->second.children.push_back(id);
  }
  for (const auto& id : order_) {
    const auto& rec = records_.at(id);
    if (!rec.terminal() && !graphs_.contains(id)) {
      graphs_.emplace(id, CommunicationGraph{id, {}});
    }
  }
}

HolonId HolarchySpec::root() const {
  if (!root_) throw TopologyError("holarchy has no root");
  return *root_;
}

const HolonRecord& HolarchySpec::record(const HolonId& id) const {
  auto it = records_.find(id);
  if (it == records_.end()) {
    throw TopologyError("unknown holon " + to_string(id));
  }
  return it->second;
}

HolonRecord& HolarchySpec::mutable_record(const HolonId& id) {
  auto it = records_.find(id);
  if (it == records_.end()) {
    throw TopologyError("unknown holon " + to_string(id));
  }
  return it->second;
}

const CommunicationGraph* HolarchySpec::graph(const HolonId& owner) const {
  auto it = graphs_.find(owner);
  return it == graphs_.end() ? nullptr : &it->second;
}

std::size_t HolarchySpec::rank(const HolonId& id) const {
  auto it = std::find(order_.begin(), order_.end(), id);
  if (it == order_.end()) throw TopologyError("unknown holon " + to_string(id));
  return static_cast<std::size_t>(it - order_.begin());
}

std::vector<HolonId> HolarchySpec::terminals() const {
  std::vector<HolonId> out;
  for (const auto& id : order_) {
    if (records_.at(id).terminal()) out.push_back(id);
  }
  return out;
}

std::vector<HolonId> HolarchySpec::non_terminals() const {
  std::vector<HolonId> out;
  for (const auto& id : order_) {
    if (!records_.at(id).terminal()) out.push_back(id);
  }
  return out;
}

std::uint32_t HolarchySpec::depth() const {
  std::uint32_t deepest = 0;
  for (const auto& [id, rec] : records_) deepest = std::max(deepest, id.level);
  return deepest;
}

std::set<HolonId> HolarchySpec::superiors(const HolonId& id) const {
  const auto& rec = record(id);
  if (!rec.parent) return {};
  return {*rec.parent};
}

const std::vector<HolonId>& HolarchySpec::subordinates(
    const HolonId& id) const {
  return record(id).children;
}

std::set<HolonId> HolarchySpec::neighbors(const HolonId& id) const {
  const auto& rec = record(id);
  if (!rec.parent) {
    throw TopologyError("the root " + to_string(id) +
                        " has no enclosing communication graph");
  }
  std::set<HolonId> out;
  const auto* g = graph(*rec.parent);
  if (g == nullptr) return out;
  for (const auto& [a, b] : g->edges) {
    if (a == id && b != id) out.insert(b);
    if (b == id && a != id) out.insert(a);
  }
  return out;
}

std::vector<Violation> validate(const HolarchySpec& spec) {
  std::vector<Violation> out;
  auto report = [&out](ViolationKind kind, std::string msg) {
    out.push_back({kind, std::move(msg)});
  };
  const auto& records = spec.records();

  // Roots.
  std::vector<HolonId> level0;
  for (const auto& [id, rec] : records) {
    if (id.level == 0) level0.push_back(id);
  }
  if (!spec.root_id() || !records.contains(*spec.root_id())) {
    report(ViolationKind::RootMissing, "no root record");
  } else if (spec.root_id()->level != 0) {
    report(ViolationKind::RootMissing,
           "root " + to_string(*spec.root_id()) + " is not at level 0");
  }
  if (level0.size() > 1) {
    report(ViolationKind::MultipleRoots,
           std::to_string(level0.size()) + " holons at level 0");
  }

  // Membership as declared by children lists.
  std::map<HolonId, std::vector<HolonId>> claimed_by;
  for (const auto& [id, rec] : records) {
    for (const auto& child : rec.children) {
      if (!records.contains(child)) {
        report(ViolationKind::DanglingReference,
               to_string(id) + " lists missing child " + to_string(child));
        continue;
      }
      claimed_by[child].push_back(id);
    }
  }

  for (const auto& [id, rec] : records) {
    if (rec.terminal() != rec.children.empty()) {
      report(ViolationKind::KindMismatch,
             to_string(id) + (rec.terminal() ? " is terminal but has children"
                                             : " is non-terminal without "
                                               "children"));
    }
    if (rec.terminal() != rec.dataset_ref.has_value()) {
      report(ViolationKind::DatasetMismatch,
             to_string(id) + (rec.terminal() ? " is terminal without a dataset"
                                             : " is non-terminal with a "
                                               "dataset"));
    }
    if (rec.terminal() && rec.initiator) {
      report(ViolationKind::InitiatorOnTerminal,
             to_string(id) + " is a terminal marked as initiator");
    }

    auto claims = claimed_by.find(id);
    std::size_t n_claims = claims == claimed_by.end() ? 0 : claims->second.size();
    if (n_claims > 1) {
      report(ViolationKind::MultipleParents,
             to_string(id) + " belongs to " + std::to_string(n_claims) +
                 " super-holons");
      continue;
    }

    bool is_root = spec.root_id() && *spec.root_id() == id;
    if (is_root) {
      if (rec.parent) {
        report(ViolationKind::MembershipMismatch,
               "root " + to_string(id) + " has a parent");
      }
      continue;
    }
    if (!rec.parent) {
      report(ViolationKind::Orphan, to_string(id) + " has no parent");
      continue;
    }
    auto parent = records.find(*rec.parent);
    if (parent == records.end()) {
      report(ViolationKind::DanglingReference,
             to_string(id) + " references missing parent " +
                 to_string(*rec.parent));
      continue;
    }
    if (id.level != rec.parent->level + 1) {
      report(ViolationKind::LevelMismatch,
             to_string(id) + " is not one level below its parent " +
                 to_string(*rec.parent));
    }
    if (n_claims == 0 || claims->second.front() != *rec.parent) {
      report(ViolationKind::MembershipMismatch,
             to_string(id) + " is not listed among the children of " +
                 to_string(*rec.parent));
    }
  }

  // Graphs.
  for (const auto& [id, rec] : records) {
    if (!rec.terminal() && spec.graph(id) == nullptr) {
      report(ViolationKind::MissingGraph,
             to_string(id) + " has no communication graph");
    }
  }
  for (const auto& [owner, g] : spec.graphs()) {
    auto rec = records.find(owner);
    if (rec == records.end()) {
      report(ViolationKind::DanglingReference,
             "graph owner " + to_string(owner) + " does not exist");
      continue;
    }
    if (rec->second.terminal()) {
      report(ViolationKind::GraphOnTerminal,
             "terminal " + to_string(owner) + " owns a graph");
    }
    const auto& kids = rec->second.children;
    auto is_child = [&kids](const HolonId& h) {
      return std::find(kids.begin(), kids.end(), h) != kids.end();
    };
    std::set<Edge> seen;
    for (const auto& e : g.edges) {
      if (e.first == e.second) {
        report(ViolationKind::SelfLoop, "self-loop on " + to_string(e.first) +
                                            " in graph of " + to_string(owner));
        continue;
      }
      if (!is_child(e.first) || !is_child(e.second)) {
        report(ViolationKind::CrossHolonEdge,
               "edge " + to_string(e.first) + "-" + to_string(e.second) +
                   " in graph of " + to_string(owner) +
                   " joins holons that are not both its children");
        continue;
      }
      if (!seen.insert(normalized(e)).second) {
        report(ViolationKind::DuplicateEdge,
               "duplicate edge " + to_string(e.first) + "-" +
                   to_string(e.second) + " in graph of " + to_string(owner));
      }
    }
  }
  return out;
}

std::size_t aggregate_data_size(
    const HolarchySpec& spec, const HolonId& id,
    const std::map<HolonId, std::size_t>& terminal_sizes) {
  const auto& rec = spec.record(id);
  if (rec.terminal()) {
    auto it = terminal_sizes.find(id);
    if (it == terminal_sizes.end()) {
      throw TopologyError("no data size for terminal " + to_string(id));
    }
    return it->second;
  }
  std::size_t total = 0;
  for (const auto& child : rec.children) {
    total += aggregate_data_size(spec, child, terminal_sizes);
  }
  return total;
}

namespace {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
           line[i] != '\r' && line[i] != '#') {
      ++i;
    }
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

struct PendingRef {
  HolonId id;
  std::size_t line;
  std::size_t column;
};

}  // namespace

HolarchySpec parse_holarchy(std::string_view text) {
  HolarchySpec spec;
  std::vector<PendingRef> refs;
  std::map<HolonId, std::size_t> graph_lines;
  std::vector<std::pair<std::size_t, CommunicationGraph>> graphs;
  std::optional<HolonId> root;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos
                                     ? std::string_view::npos
                                     : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    auto tokens = tokenize(line);
    if (tokens.empty()) continue;

    auto expect_id = [&](const Token& t) {
      auto id = try_parse_id(t.text);
      if (!id) {
        throw ParseError(line_no, t.column,
                         "expected holon id <level>.<index>, got '" +
                             std::string(t.text) + "'");
      }
      return *id;
    };

    const auto& head = tokens[0];
    if (head.text == "holon") {
      if (tokens.size() < 3) {
        throw ParseError(line_no, head.column + head.text.size(),
                         "holon declaration needs an id and a kind");
      }
      HolonRecord rec;
      rec.id = expect_id(tokens[1]);
      if (tokens[2].text == "terminal") {
        rec.kind = HolonKind::Terminal;
      } else if (tokens[2].text == "nonterminal") {
        rec.kind = HolonKind::NonTerminal;
      } else {
        throw ParseError(line_no, tokens[2].column,
                         "expected 'terminal' or 'nonterminal', got '" +
                             std::string(tokens[2].text) + "'");
      }
      for (std::size_t k = 3; k < tokens.size(); ++k) {
        const auto& t = tokens[k];
        if (t.text.starts_with("parent=")) {
          if (rec.parent) {
            throw ParseError(line_no, t.column, "parent given twice");
          }
          Token value{t.text.substr(7), t.column + 7};
          rec.parent = expect_id(value);
          refs.push_back({*rec.parent, line_no, value.column});
        } else if (t.text.starts_with("data=")) {
          auto ref = t.text.substr(5);
          if (ref.empty()) {
            throw ParseError(line_no, t.column + 5, "empty dataset reference");
          }
          rec.dataset_ref = std::string(ref);
        } else if (t.text == "initiator") {
          rec.initiator = true;
        } else {
          throw ParseError(line_no, t.column,
                           "unknown holon attribute '" + std::string(t.text) +
                               "'");
        }
      }
      if (spec.contains(rec.id)) {
        throw ParseError(line_no, tokens[1].column,
                         "duplicate holon " + to_string(rec.id));
      }
      if (rec.id.level == 0) {
        if (root) {
          throw ParseError(line_no, tokens[1].column,
                           "second root " + to_string(rec.id));
        }
        root = rec.id;
      }
      spec.add(std::move(rec));
    } else if (head.text == "graph") {
      if (tokens.size() < 2) {
        throw ParseError(line_no, head.column + head.text.size(),
                         "graph declaration needs an owner id");
      }
      CommunicationGraph g;
      g.owner = expect_id(tokens[1]);
      if (graph_lines.contains(g.owner)) {
        throw ParseError(line_no, tokens[1].column,
                         "duplicate graph for " + to_string(g.owner));
      }
      graph_lines[g.owner] = line_no;
      refs.push_back({g.owner, line_no, tokens[1].column});
      for (std::size_t k = 2; k < tokens.size(); ++k) {
        const auto& t = tokens[k];
        auto dash = t.text.find('-');
        if (dash == std::string_view::npos) {
          throw ParseError(line_no, t.column,
                           "expected edge <id>-<id>, got '" +
                               std::string(t.text) + "'");
        }
        Token lhs{t.text.substr(0, dash), t.column};
        Token rhs{t.text.substr(dash + 1), t.column + dash + 1};
        auto a = expect_id(lhs);
        auto b = expect_id(rhs);
        refs.push_back({a, line_no, lhs.column});
        refs.push_back({b, line_no, rhs.column});
        g.edges.emplace_back(a, b);
      }
      graphs.emplace_back(line_no, std::move(g));
    } else {
      throw ParseError(line_no, head.column,
                       "expected 'holon' or 'graph', got '" +
                           std::string(head.text) + "'");
    }
  }

  for (const auto& ref : refs) {
    if (!spec.contains(ref.id)) {
      throw ParseError(ref.line, ref.column,
                       "reference to undeclared holon " + to_string(ref.id));
    }
  }
  if (!root) throw ParseError(line_no, 1, "no root holon at level 0");
  spec.set_root(*root);
  for (auto& [line, g] : graphs) spec.set_graph(std::move(g));
  spec.link_children();
  return spec;
}

HolarchySpec load_holarchy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open holarchy config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_holarchy(buf.str());
}

std::string to_config_text(const HolarchySpec& spec) {
  std::string out;
  for (const auto& id : spec.declaration_order()) {
    const auto& rec = spec.record(id);
    out += "holon " + to_string(id) +
           (rec.terminal() ? " terminal" : " nonterminal");
    if (rec.parent) out += " parent=" + to_string(*rec.parent);
    if (rec.dataset_ref) out += " data=" + *rec.dataset_ref;
    if (rec.initiator) out += " initiator";
    out += '\n';
  }
  for (const auto& id : spec.declaration_order()) {
    const auto* g = spec.graph(id);
    if (g == nullptr) continue;
    out += "graph " + to_string(id);
    for (const auto& [a, b] : g->edges) {
      out += " " + to_string(a) + "-" + to_string(b);
    }
    out += '\n';
  }
  return out;
}

}  // namespace holon
