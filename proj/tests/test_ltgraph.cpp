#include <catch2/catch_amalgamated.hpp>

#include <declarealign/ltgraph.hpp>

using namespace declarealign;

namespace {

using Seq = std::vector<Activity>;

std::vector<Seq> seqs_of(const LTGraph& g) {
    auto lin = g.linearizations();
    REQUIRE_FALSE(lin.truncated);
    return lin.sequences;
}

}  // namespace

TEST_CASE("a trace becomes a totally ordered chain of original cells", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B", "C"});
    REQUIRE(g.nodes().size() == 3);
    CHECK(g.arcs() == std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {1, 2}});
    CHECK(g.node(1).chain.size() == 1);
    CHECK(g.cell({1, 0}).choices == BranchSet{"B"});
    CHECK(g.cell({1, 0}).trace_index == 1);
    CHECK(g.cell({1, 0}).original());
    CHECK(g.next_id() == 3);
    CHECK_FALSE(g.has_cycle());
    CHECK(seqs_of(g) == std::vector<Seq>{{"A", "B", "C"}});
    CHECK(seqs_of(LTGraph::from_trace({})) == std::vector<Seq>{{}});
}

TEST_CASE("fixes return a new graph and leave the input alone", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B"});
    const auto copy = g;
    const auto g2 = g.apply(RemoveNode{0});
    CHECK(g == copy);
    CHECK(g2.nodes().size() == 1);
}

TEST_CASE("inserting a node wires the requested arcs", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "D"});
    const auto g2 = g.apply(InsertNode{{inserted_cell(BranchSet{"B", "C"})}, {0}, {1}});
    REQUIRE(g2.nodes().size() == 3);
    const auto& n = g2.node(2);
    CHECK(n.chain.size() == 1);
    CHECK(n.chain[0].choices == BranchSet{"B", "C"});
    CHECK_FALSE(n.chain[0].original());
    CHECK(g2.arcs() == std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {0, 2}, {2, 1}});
    CHECK(seqs_of(g2) == std::vector<Seq>{{"A", "B", "D"}, {"A", "C", "D"}});

    CHECK_THROWS_AS(g.apply(InsertNode{{inserted_cell(BranchSet{"B"})}, {7}, {}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(g.apply(InsertNode{{}, {}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(g.apply(InsertNode{{inserted_cell(BranchSet{})}, {}, {}}),
                    std::invalid_argument);
}

TEST_CASE("unconstrained inserts run in parallel to the rest", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A"}).apply(InsertNode{{inserted_cell(BranchSet{"B"})}, {}, {}});
    const auto seqs = seqs_of(g);
    CHECK(seqs == std::vector<Seq>{{"A", "B"}, {"B", "A"}});
}

TEST_CASE("removing a single-cell node rewires around it", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B", "C"});
    const auto g2 = g.apply(RemoveNode{1});
    REQUIRE(g2.nodes().size() == 2);
    CHECK(g2.arcs() == std::vector<std::pair<NodeId, NodeId>>{{0, 2}});
    CHECK(seqs_of(g2) == std::vector<Seq>{{"A", "C"}});
    CHECK_THROWS_AS(g.apply(RemoveNode{9}), std::invalid_argument);
    CHECK_THROWS_AS(g.apply(RemoveNode{1, 3}), std::invalid_argument);
}

TEST_CASE("removing one cell of a chain keeps the node", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B", "C"}).apply(MergeChains{0, 1});
    REQUIRE(g.node(0).chain.size() == 2);
    const auto g2 = g.apply(RemoveNode{0, 0});
    REQUIRE(g2.node(0).chain.size() == 1);
    CHECK(g2.cell({0, 0}).choices == BranchSet{"B"});
    CHECK(seqs_of(g2) == std::vector<Seq>{{"B", "C"}});
}

TEST_CASE("arcs can only be added between existing distinct nodes", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A"}).apply(InsertNode{{inserted_cell(BranchSet{"B"})}, {}, {}});
    const auto g2 = g.apply(AddArc{1, 0});
    CHECK(seqs_of(g2) == std::vector<Seq>{{"B", "A"}});
    CHECK_THROWS_AS(g.apply(AddArc{0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(g.apply(AddArc{0, 9}), std::invalid_argument);
}

TEST_CASE("a back arc makes the graph cyclic", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B"});
    CHECK_FALSE(g.has_cycle());
    CHECK(g.apply(AddArc{1, 0}).has_cycle());
}

TEST_CASE("pinning orders the node against everything, present and future", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"B", "A"});
    const auto pinned = g.apply(PinNode{1, PinSide::First});
    CHECK(pinned.has_cycle());  // A cannot start: B is already before it

    const auto ok = g.apply(PinNode{0, PinSide::First}).apply(PinNode{1, PinSide::Last});
    CHECK_FALSE(ok.has_cycle());
    CHECK(ok.pinned_first_node() == NodeId{0});
    CHECK(ok.pinned_last_node() == NodeId{1});

    // later inserts stay inside the pinned boundaries
    const auto g3 = ok.apply(InsertNode{{inserted_cell(BranchSet{"C"})}, {}, {}});
    CHECK(seqs_of(g3) == std::vector<Seq>{{"B", "C", "A"}});

    CHECK_THROWS_AS(ok.apply(PinNode{2, PinSide::First}), std::invalid_argument);
    CHECK_NOTHROW(ok.apply(PinNode{0, PinSide::First}));  // re-pinning the holder
    CHECK_THROWS_AS(g.apply(PinNode{9, PinSide::Last}), std::invalid_argument);
}

TEST_CASE("subsetting narrows a cell's choices", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A"}).apply(
        InsertNode{{inserted_cell(BranchSet{"B", "C"})}, {0}, {}});
    const auto g2 = g.apply(SubsetCell{1, 0, BranchSet{"C"}});
    CHECK(g2.cell({1, 0}).choices == BranchSet{"C"});
    CHECK(seqs_of(g2) == std::vector<Seq>{{"A", "C"}});
    CHECK_THROWS_AS(g.apply(SubsetCell{1, 0, BranchSet{"D"}}), std::invalid_argument);
    CHECK_THROWS_AS(g.apply(SubsetCell{1, 0, BranchSet{}}), std::invalid_argument);
    CHECK_THROWS_AS(g.apply(SubsetCell{1, 5, BranchSet{"B"}}), std::invalid_argument);
    CHECK_THROWS_AS(g.apply(SubsetCell{9, 0, BranchSet{"B"}}), std::invalid_argument);
}

TEST_CASE("merging chains makes the cells immediately adjacent", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B", "C"});
    const auto merged = g.apply(MergeChains{0, 1});
    REQUIRE(merged.nodes().size() == 2);
    REQUIRE(merged.node(0).chain.size() == 2);
    CHECK(merged.cell({0, 0}).choices == BranchSet{"A"});
    CHECK(merged.cell({0, 1}).choices == BranchSet{"B"});
    CHECK(merged.arcs() == std::vector<std::pair<NodeId, NodeId>>{{0, 2}});
    CHECK(seqs_of(merged) == std::vector<Seq>{{"A", "B", "C"}});
    CHECK_THROWS_AS(g.apply(MergeChains{0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(g.apply(MergeChains{0, 9}), std::invalid_argument);
}

TEST_CASE("merging against the arc direction is detected as a cycle", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B"});
    CHECK(g.apply(MergeChains{1, 0}).has_cycle());
}

TEST_CASE("merging incomparable nodes forces adjacency", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A"}).apply(
        InsertNode{{inserted_cell(BranchSet{"B"})}, {}, {}});
    const auto merged = g.apply(MergeChains{0, 1});
    CHECK_FALSE(merged.has_cycle());
    CHECK(seqs_of(merged) == std::vector<Seq>{{"A", "B"}});
}

TEST_CASE("splitting undoes a merge", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B", "C"});
    const auto merged = g.apply(MergeChains{0, 1});
    const auto split = merged.apply(SplitChain{0, 1});
    CHECK(seqs_of(split) == seqs_of(g));
    CHECK(split.canonical_fingerprint() == g.canonical_fingerprint());
    CHECK_THROWS_AS(merged.apply(SplitChain{0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(merged.apply(SplitChain{0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(merged.apply(SplitChain{9, 1}), std::invalid_argument);
}

TEST_CASE("diamond graphs admit every interleaving", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B", "D"}).apply(
        InsertNode{{inserted_cell(BranchSet{"C"})}, {0}, {2}});
    CHECK(seqs_of(g) == std::vector<Seq>{{"A", "B", "C", "D"}, {"A", "C", "B", "D"}});
}

TEST_CASE("linearization enumeration can be capped", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A"}).apply(
        InsertNode{{inserted_cell(BranchSet{"B", "C"})}, {0}, {}});
    const auto full = g.linearizations();
    CHECK(full.sequences.size() == 2);
    CHECK_FALSE(full.truncated);
    const auto capped = g.linearizations(1);
    CHECK(capped.sequences.size() == 1);
    CHECK(capped.truncated);
}

TEST_CASE("topological order prefers original positions and stable content", "[ltgraph]") {
    auto g = LTGraph::from_trace({"B"})
                 .apply(InsertNode{{inserted_cell(BranchSet{"Z"})}, {}, {}})
                 .apply(InsertNode{{inserted_cell(BranchSet{"A"})}, {}, {}});
    // all three nodes incomparable: the original cell wins, then content
    CHECK(g.topological_nodes() == std::vector<NodeId>{0, 2, 1});
    const auto sites = g.topological_sites();
    REQUIRE(sites.size() == 3);
    CHECK(sites[0] == Site{0, 0});
    CHECK(sites[1] == Site{2, 0});
    CHECK(sites[2] == Site{1, 0});
    CHECK_THROWS_AS(g.apply(AddArc{0, 1}).apply(AddArc{1, 0}).topological_nodes(),
                    std::logic_error);
}

TEST_CASE("fingerprints ignore node identifiers", "[ltgraph]") {
    const InsertNode ins{{inserted_cell(BranchSet{"C"})}, {1}, {}};
    const auto g1 = LTGraph::from_trace({"A", "B"}).apply(ins);
    const auto g2 = LTGraph::from_trace({"A", "B"})
                        .apply(InsertNode{{inserted_cell(BranchSet{"X"})}, {1}, {}})
                        .apply(RemoveNode{2})
                        .apply(ins);
    CHECK_FALSE(g1 == g2);  // ids differ
    CHECK(g1.canonical_fingerprint() == g2.canonical_fingerprint());
}

TEST_CASE("fingerprints ignore transitively implied arcs", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B", "C"});
    CHECK(g.apply(AddArc{0, 2}).canonical_fingerprint() == g.canonical_fingerprint());
}

TEST_CASE("fingerprints see pins, choices, provenance and shape", "[ltgraph]") {
    const auto g = LTGraph::from_trace({"A", "B"});
    CHECK(g.apply(PinNode{0, PinSide::First}).canonical_fingerprint() !=
          g.canonical_fingerprint());
    CHECK(LTGraph::from_trace({"B", "A"}).canonical_fingerprint() != g.canonical_fingerprint());
    CHECK(g.apply(MergeChains{0, 1}).canonical_fingerprint() != g.canonical_fingerprint());

    const auto b1 = g.apply(InsertNode{{inserted_cell(BranchSet{"C", "D"})}, {1}, {}});
    const auto b2 = g.apply(InsertNode{{inserted_cell(BranchSet{"C"})}, {1}, {}});
    CHECK(b1.canonical_fingerprint() != b2.canonical_fingerprint());
    CHECK(b1.apply(SubsetCell{2, 0, BranchSet{"C"}}).canonical_fingerprint() ==
          b2.canonical_fingerprint());
}

TEST_CASE("fingerprints separate symmetric-looking twins by their arcs", "[ltgraph]") {
    // two parallel pairs: (A0 -> X) (A1 -> Y)  vs  (A0 -> Y) (A1 -> X)
    const auto base = LTGraph::from_trace({"A", "A"}).apply(RemoveNode{0}).apply(RemoveNode{1});
    auto rebuild = [&](const Activity& first, const Activity& second) {
        return base
            .apply(InsertNode{{inserted_cell(BranchSet{"A"})}, {}, {}})   // id 2
            .apply(InsertNode{{inserted_cell(BranchSet{"A"})}, {}, {}})   // id 3
            .apply(InsertNode{{inserted_cell(BranchSet{first})}, {2}, {}})
            .apply(InsertNode{{inserted_cell(BranchSet{second})}, {3}, {}});
    };
    const auto one = rebuild("X", "Y");
    const auto two = rebuild("Y", "X");
    CHECK(one.canonical_fingerprint() == two.canonical_fingerprint());  // isomorphic relabeling

    const auto three = base.apply(InsertNode{{inserted_cell(BranchSet{"A"})}, {}, {}})
                           .apply(InsertNode{{inserted_cell(BranchSet{"A"})}, {}, {}})
                           .apply(InsertNode{{inserted_cell(BranchSet{"X"})}, {2}, {}})
                           .apply(InsertNode{{inserted_cell(BranchSet{"Y"})}, {2}, {}});
    CHECK(three.canonical_fingerprint() != one.canonical_fingerprint());
}
