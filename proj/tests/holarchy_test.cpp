#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "holon/error.hpp"
#include "holon/holarchy.hpp"
#include "holon/presets.hpp"

namespace holon {
namespace {

constexpr const char* kFedAvgText = R"(# one root, four clients
holon 0.1 nonterminal
holon 1.1 terminal parent=0.1 data=a
holon 1.2 terminal parent=0.1 data=b
holon 1.3 terminal parent=0.1 data=c
holon 1.4 terminal parent=0.1 data=d
)";

bool has_kind(const std::vector<Violation>& v, ViolationKind kind) {
  return std::any_of(v.begin(), v.end(),
                     [kind](const Violation& x) { return x.kind == kind; });
}

TEST(HolonId, FormatsAndParses) {
  EXPECT_EQ(to_string(HolonId{2, 7}), "2.7");
  EXPECT_EQ(parse_holon_id("3.11"), (HolonId{3, 11}));
  EXPECT_THROW(parse_holon_id("3"), Error);
  EXPECT_THROW(parse_holon_id("1.0"), Error);
  EXPECT_THROW(parse_holon_id("a.b"), Error);
}

TEST(ParseHolarchy, MinimalFederatedShape) {
  auto spec = parse_holarchy(kFedAvgText);
  EXPECT_EQ(spec.size(), 5u);
  EXPECT_EQ(spec.root(), (HolonId{0, 1}));
  EXPECT_FALSE(spec.record(spec.root()).terminal());
  EXPECT_EQ(spec.subordinates(spec.root()).size(), 4u);
  EXPECT_EQ(spec.record({1, 3}).dataset_ref, "c");
  EXPECT_TRUE(validate(spec).empty());
}

TEST(ParseHolarchy, DanglingParentIsReportedWithPosition) {
  try {
    parse_holarchy("holon 0.1 nonterminal\nholon 1.1 terminal parent=0.9 data=x\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 27u);
  }
}

TEST(ParseHolarchy, SyntaxErrorsCarryPosition) {
  try {
    parse_holarchy("holon 0.1 nonterminal\n  holon 1.1 leaf parent=0.1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 13u);
  }
  EXPECT_THROW(parse_holarchy("node 0.1 nonterminal\n"), ParseError);
  EXPECT_THROW(parse_holarchy("holon 0.1\n"), ParseError);
  EXPECT_THROW(parse_holarchy("holon 0.1 nonterminal color=red\n"), ParseError);
  EXPECT_THROW(parse_holarchy("holon 0.1 nonterminal\ngraph 0.1 1.1\n"),
               ParseError);
  EXPECT_THROW(parse_holarchy("# nothing\n"), ParseError);
}

TEST(ParseHolarchy, DuplicatesAreRejected) {
  EXPECT_THROW(parse_holarchy("holon 0.1 nonterminal\n"
                              "holon 1.1 terminal parent=0.1 data=a\n"
                              "holon 1.1 terminal parent=0.1 data=b\n"),
               ParseError);
  EXPECT_THROW(parse_holarchy("holon 0.1 nonterminal\nholon 0.2 nonterminal\n"),
               ParseError);
  EXPECT_THROW(parse_holarchy("holon 0.1 nonterminal\n"
                              "holon 1.1 terminal parent=0.1 data=a\n"
                              "graph 0.1\ngraph 0.1\n"),
               ParseError);
}

TEST(ParseHolarchy, ParentMayBeDeclaredLater) {
  auto spec = parse_holarchy("holon 1.1 terminal parent=0.1 data=a\n"
                             "holon 0.1 nonterminal\n");
  EXPECT_TRUE(validate(spec).empty());
  EXPECT_EQ(spec.subordinates({0, 1}), std::vector<HolonId>{(HolonId{1, 1})});
}

TEST(ParseHolarchy, HoAL2LConfigHasFourteenRecordsOnTwoLevels) {
  auto spec = parse_holarchy(to_config_text(build_preset("hoal2l")));
  EXPECT_EQ(spec.size(), 14u);
  EXPECT_EQ(spec.depth(), 2u);
  EXPECT_EQ(spec.non_terminals().size(), 4u);
  EXPECT_EQ(spec.terminals().size(), 10u);
}

TEST(ConfigText, RoundTripsEveryPreset) {
  for (const auto& name : canonical_preset_names()) {
    auto spec = build_preset(name);
    auto text = to_config_text(spec);
    EXPECT_EQ(parse_holarchy(text), spec) << name;
    EXPECT_EQ(to_config_text(parse_holarchy(text)), text) << name;
  }
}

TEST(Validate, WellFormedPresetsPass) {
  EXPECT_TRUE(validate(build_fedavg(10)).empty());
  EXPECT_TRUE(validate(build_hfl(3, 2)).empty());
}

TEST(Validate, TerminalWithTwoParentsGivesOneUniquenessViolation) {
  auto spec = build_hfl(2, 1);
  // 2.1 belongs to 1.1; make 1.2 claim it too.
  spec.mutable_record({1, 2}).children.push_back({2, 1});
  auto v = validate(spec);
  ASSERT_EQ(std::count_if(v.begin(), v.end(),
                          [](const Violation& x) {
                            return x.kind == ViolationKind::MultipleParents;
                          }),
            1);
}

TEST(Validate, CrossHolonEdgeIsOneViolation) {
  auto spec = build_hfl(2, 2);
  spec.set_graph({{1, 1}, {{{2, 1}, {2, 3}}}});
  auto v = validate(spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::CrossHolonEdge);
}

TEST(Validate, ReportsStructuralProblems) {
  auto spec = build_fedavg(3);
  spec.set_graph({{0, 1}, {{{1, 1}, {1, 1}}, {{1, 2}, {1, 3}}, {{1, 3}, {1, 2}}}});
  auto v = validate(spec);
  EXPECT_TRUE(has_kind(v, ViolationKind::SelfLoop));
  EXPECT_TRUE(has_kind(v, ViolationKind::DuplicateEdge));

  auto no_data = build_fedavg(2);
  no_data.mutable_record({1, 1}).dataset_ref.reset();
  EXPECT_TRUE(has_kind(validate(no_data), ViolationKind::DatasetMismatch));

  auto initiator = build_fedavg(2);
  initiator.mutable_record({1, 2}).initiator = true;
  EXPECT_TRUE(has_kind(validate(initiator), ViolationKind::InitiatorOnTerminal));

  HolarchySpec empty;
  EXPECT_TRUE(has_kind(validate(empty), ViolationKind::RootMissing));

  auto skipped = parse_holarchy("holon 0.1 nonterminal\n"
                                "holon 2.1 terminal parent=0.1 data=a\n");
  EXPECT_TRUE(has_kind(validate(skipped), ViolationKind::LevelMismatch));

  auto orphan = build_fedavg(2);
  orphan.mutable_record({1, 2}).parent.reset();
  orphan.link_children();
  EXPECT_TRUE(has_kind(validate(orphan), ViolationKind::Orphan));

  auto childless = parse_holarchy("holon 0.1 nonterminal\n"
                                  "holon 1.1 nonterminal parent=0.1\n"
                                  "holon 1.2 nonterminal parent=0.1\n"
                                  "holon 2.1 terminal parent=1.1 data=a\n");
  EXPECT_TRUE(has_kind(validate(childless), ViolationKind::KindMismatch));
}

TEST(Validate, IsIdempotentAndLeavesSpecUntouched) {
  auto spec = build_hfl(2, 2);
  spec.set_graph({{1, 1}, {{{2, 1}, {2, 3}}}});
  const auto copy = spec;
  auto first = validate(spec);
  auto second = validate(spec);
  ASSERT_EQ(first.size(), second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(first[i].kind, second[i].kind);
    EXPECT_EQ(first[i].message, second[i].message);
  }
  EXPECT_EQ(spec, copy);
}

TEST(Queries, SuperiorsSubordinatesNeighbors) {
  auto fedavg = build_fedavg(4);
  EXPECT_TRUE(fedavg.superiors({0, 1}).empty());
  EXPECT_EQ(fedavg.superiors({1, 3}), std::set<HolonId>{(HolonId{0, 1})});
  EXPECT_TRUE(fedavg.subordinates({1, 2}).empty());
  EXPECT_EQ(fedavg.subordinates({0, 1}).size(), 4u);
  EXPECT_TRUE(fedavg.neighbors({1, 1}).empty());
  EXPECT_THROW(fedavg.neighbors({0, 1}), TopologyError);
  EXPECT_THROW(fedavg.superiors({5, 5}), TopologyError);

  auto p2p = build_p2p(4, complete_edges(4));
  EXPECT_EQ(p2p.neighbors({1, 2}),
            (std::set<HolonId>{{1, 1}, {1, 3}, {1, 4}}));

  auto hoal2l = build_preset("hoal2l");
  EXPECT_EQ(hoal2l.superiors({1, 2}), std::set<HolonId>{(HolonId{0, 1})});
  EXPECT_EQ(hoal2l.subordinates({0, 1}),
            (std::vector<HolonId>{{1, 1}, {1, 2}, {1, 3}}));

  auto hoal1p = build_preset("hoal1p");
  EXPECT_EQ(hoal1p.neighbors({1, 2}).size(), 2u);
}

TEST(Queries, MembershipDualityAndNeighborSymmetry) {
  for (const auto& name : canonical_preset_names()) {
    auto spec = build_preset(name);
    for (const auto& id : spec.declaration_order()) {
      if (id == spec.root()) continue;
      const auto parent = *spec.record(id).parent;
      EXPECT_EQ(spec.superiors(id), std::set<HolonId>{parent});
      const auto& subs = spec.subordinates(parent);
      EXPECT_NE(std::find(subs.begin(), subs.end(), id), subs.end());
      for (const auto& n : spec.neighbors(id)) {
        EXPECT_TRUE(spec.neighbors(n).contains(id)) << name;
      }
    }
  }
}

TEST(AggregateDataSize, SumsRecursively) {
  auto fedavg = build_fedavg(2);
  std::map<HolonId, std::size_t> sizes{{{1, 1}, 500}, {{1, 2}, 500}};
  EXPECT_EQ(aggregate_data_size(fedavg, {1, 1}, sizes), 500u);
  EXPECT_EQ(aggregate_data_size(fedavg, {0, 1}, sizes), 1000u);
  sizes.erase({1, 2});
  EXPECT_THROW(aggregate_data_size(fedavg, {0, 1}, sizes), TopologyError);
}

TEST(AggregateDataSize, HoAL3LRootWithSizes100To1000) {
  auto spec = build_preset("hoal3l");
  std::map<HolonId, std::size_t> sizes;
  std::size_t flat = 0;
  std::size_t s = 100;
  for (const auto& t : spec.terminals()) {
    sizes[t] = s;
    flat += s;
    s += 100;
  }
  EXPECT_EQ(flat, 5500u);
  EXPECT_EQ(aggregate_data_size(spec, spec.root(), sizes), flat);
}

TEST(AggregateDataSize, RootEqualsFlatSumForRandomTrees) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    // Random tree: each new holon attaches to a random earlier non-terminal.
    HolarchySpec spec;
    spec.set_root({0, 1});
    spec.add({.id = {0, 1}, .kind = HolonKind::NonTerminal});
    std::vector<HolonId> heads{{0, 1}};
    std::map<std::uint32_t, std::uint32_t> next_index;
    const int extra_heads = static_cast<int>(rng() % 5);
    for (int i = 0; i < extra_heads; ++i) {
      auto parent = heads[rng() % heads.size()];
      HolonId id{parent.level + 1, ++next_index[parent.level + 1]};
      spec.add({.id = id, .kind = HolonKind::NonTerminal, .parent = parent});
      heads.push_back(id);
    }
    std::map<HolonId, std::size_t> sizes;
    std::size_t flat = 0;
    // Every head gets at least one terminal so the tree stays valid.
    for (std::size_t h = 0; h < heads.size() + 6; ++h) {
      auto parent = h < heads.size() ? heads[h] : heads[rng() % heads.size()];
      HolonId id{parent.level + 1, ++next_index[parent.level + 1]};
      spec.add({.id = id, .kind = HolonKind::Terminal, .parent = parent,
                .dataset_ref = std::to_string(h)});
      sizes[id] = 1 + rng() % 1000;
      flat += sizes[id];
    }
    spec.link_children();
    ASSERT_TRUE(validate(spec).empty());
    EXPECT_EQ(aggregate_data_size(spec, spec.root(), sizes), flat);
  }
}

}  // namespace
}  // namespace holon
