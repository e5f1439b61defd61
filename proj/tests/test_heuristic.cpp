#include <catch2/catch_amalgamated.hpp>

#include <declarealign/graph_eval.hpp>
#include <declarealign/heuristic.hpp>
#include <declarealign/oracle.hpp>
#include <declarealign/parse.hpp>

using namespace declarealign;

namespace {

HeuristicResult estimate_for(const std::string& model_text, const std::vector<Activity>& trace) {
    const Model m = parse_model(model_text);
    const LTGraph g = LTGraph::from_trace(trace);
    return heuristic(g, m, violated_activations(g, m), CostFunction{});
}

}  // namespace

TEST_CASE("two mergeable inserts count once") {
    // Both A occurrences demand a following B-or-C; one shared insert covers both.
    const auto r = estimate_for("Response(A, [B, C])\nPrecedence(C, B)", {"A", "A"});
    REQUIRE(r.proposals.size() == 2);
    REQUIRE(r.estimate == 1.0);
}

TEST_CASE("three mergeable inserts still count once") {
    const auto r = estimate_for("Response(A, B)", {"A", "A", "A"});
    REQUIRE(r.proposals.size() == 3);
    REQUIRE(r.estimate == 1.0);
}

TEST_CASE("independent violations add up") {
    // Removals of distinct activities cannot be shared.
    const auto r = estimate_for("NotCoExistence(A, B)\nNotCoExistence(C, D)",
                                {"A", "B", "C", "D"});
    REQUIRE(r.estimate == 2.0);
}

TEST_CASE("identical whole-side removals collapse") {
    // Both sides of one NotCoExistence propose the same two wholesale removals.
    const auto r = estimate_for("NotCoExistence(A, B)", {"A", "B"});
    REQUIRE(r.estimate == 1.0);
}

TEST_CASE("goal state estimates zero") {
    const auto r = estimate_for("Response(A, B)\nExistence(1, A)", {"A", "B"});
    REQUIRE(r.proposals.empty());
    REQUIRE(r.estimate == 0.0);
}

TEST_CASE("non-uniform costs flow through") {
    const Model m = parse_model("Response(A, B)");
    const LTGraph g = LTGraph::from_trace({"A"});
    CostFunction cf;
    cf.log_move["A"] = 7.0;
    cf.model_move["B"] = 3.0;
    const auto r = heuristic(g, m, violated_activations(g, m), cf);
    REQUIRE(r.estimate == 3.0);  // inserting B beats deleting A
}

TEST_CASE("merge rules") {
    const GraphActivation origin{};
    const Action remove_one{{RemoveNode{0, 0}}, 1.0, origin};
    const Action remove_other{{RemoveNode{1, 0}}, 1.0, origin};
    const Action remove_both{{RemoveNode{0, 0}, RemoveNode{1, 0}}, 2.0, origin};
    const Action insert_b{{InsertNode{{inserted_cell(BranchSet{"B"})}, {0}, {}}}, 1.0, origin};
    const Action insert_bc{{InsertNode{{inserted_cell(BranchSet{"B", "C"})}, {1}, {}}}, 1.0,
                           origin};
    const Action insert_d{{InsertNode{{inserted_cell(BranchSet{"D"})}, {0}, {}}}, 1.0, origin};

    SECTION("merging an action with itself is the action") {
        const auto merged = detail::merge_actions(insert_b, insert_b);
        REQUIRE(merged);
        REQUIRE(merged->fixes == insert_b.fixes);
        REQUIRE(merged->cost == 1.0);
    }
    SECTION("removal and insert never merge") {
        REQUIRE(!detail::merge_actions(remove_one, insert_b));
    }
    SECTION("disjoint insert choices never merge") {
        REQUIRE(!detail::merge_actions(insert_b, insert_d));
    }
    SECTION("intersecting inserts merge with combined arcs") {
        const auto merged = detail::merge_actions(insert_b, insert_bc);
        REQUIRE(merged);
        REQUIRE(merged->cost == 1.0);
        const auto& ins = std::get<InsertNode>(merged->fixes[0]);
        REQUIRE(ins.cells.size() == 1);
        REQUIRE(ins.cells[0].choices == BranchSet{"B"});
        REQUIRE(ins.preds == std::vector<NodeId>{0, 1});
        REQUIRE(ins.succs.empty());
    }
    SECTION("inserts demanding a node on both sides never merge") {
        const Action before{{InsertNode{{inserted_cell(BranchSet{"B"})}, {}, {0}}}, 1.0, origin};
        REQUIRE(!detail::merge_actions(insert_b, before));
    }
    SECTION("a removal superset absorbs its subset") {
        const auto merged = detail::merge_actions(remove_both, remove_one);
        REQUIRE(merged);
        REQUIRE(merged->fixes == remove_both.fixes);
        REQUIRE(merged->cost == 2.0);
    }
    SECTION("disjoint removals never merge") {
        REQUIRE(!detail::merge_actions(remove_one, remove_other));
    }
}

TEST_CASE("estimate stays between the bounds") {
    InstanceSpec spec;
    spec.alphabet_size = 5;
    spec.constraint_count = 4;
    spec.trace_length = 8;
    const CostFunction cf;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        spec.seed = seed;
        const Instance inst = generate_instance(spec);
        const LTGraph g = LTGraph::from_trace(inst.trace.activities);
        const auto violated = violated_activations(g, inst.model);
        const auto r = heuristic(g, inst.model, violated, cf);
        CAPTURE(seed);
        double floor = 0.0, ceiling = 0.0;
        for (const auto& [act, actions] : r.proposals) {
            double cheapest = std::numeric_limits<double>::infinity();
            for (const auto& a : actions) cheapest = std::min(cheapest, a.cost);
            floor = std::max(floor, cheapest);
            ceiling += cheapest;
        }
        REQUIRE(r.estimate >= floor);
        REQUIRE(r.estimate <= ceiling);
    }
}

TEST_CASE("estimate never exceeds the true optimum") {
    InstanceSpec spec;
    spec.alphabet_size = 4;
    spec.constraint_count = 3;
    spec.trace_length = 6;
    const CostFunction cf;
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
        spec.seed = seed;
        const Instance inst = generate_instance(spec);
        const auto truth = brute_force_align(inst.trace, inst.model, 6.0);
        if (!truth) continue;
        const LTGraph g = LTGraph::from_trace(inst.trace.activities);
        const auto r = heuristic(g, inst.model, violated_activations(g, inst.model), cf);
        CAPTURE(seed, inst.trace.activities, serialize_model(inst.model));
        REQUIRE(r.estimate <= truth->cost + 1e-9);
    }
}

TEST_CASE("estimates are reproducible") {
    const auto a = estimate_for("Response(A, [B, C])\nPrecedence(C, B)", {"A", "A"});
    const auto b = estimate_for("Response(A, [B, C])\nPrecedence(C, B)", {"A", "A"});
    REQUIRE(a.estimate == b.estimate);
    REQUIRE(a.proposals.size() == b.proposals.size());
}
