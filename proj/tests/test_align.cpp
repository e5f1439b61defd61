#include <catch2/catch_amalgamated.hpp>

#include <declarealign/align.hpp>
#include <declarealign/oracle.hpp>
#include <declarealign/parse.hpp>

using namespace declarealign;

namespace {

AlignResult run(const std::string& model_text, const std::vector<Activity>& trace,
                const SearchConfig& cfg = {}) {
    return align(Trace{std::nullopt, trace}, parse_model(model_text), cfg);
}

}  // namespace

TEST_CASE("repeated activation resolved by one shared insert") {
    const auto r = run("Response(A, [B, C])\nPrecedence(C, B)", {"A", "A"});
    REQUIRE(r.outcome == AlignOutcome::Success);
    REQUIRE(r.alignment);
    REQUIRE(r.alignment->cost == 1.0);
    const std::vector<Move> expected{sync_move("A"), sync_move("A"), model_move("C")};
    REQUIRE(r.alignment->moves == expected);
    REQUIRE(r.stats.expanded_states >= 1);
    REQUIRE(r.stats.discovered_states >= 1);
}

TEST_CASE("hospital admission trace needs two edits") {
    const auto r = run(
        "Choice(ANC, L)\nChainPrecedence([ERT, ANC], RB)\nAbsence(2, IVA)\nChainResponse(IVA, "
        "RB)",
        {"ANC", "L", "IVA", "RB"});
    REQUIRE(r.outcome == AlignOutcome::Success);
    REQUIRE(r.alignment);
    REQUIRE(r.alignment->cost == 2.0);
    REQUIRE(r.stats.time_ms < 1000.0);
}

TEST_CASE("goal graph reads off as the expected alignment") {
    // A D A with the middle repaired: drop the trailing A, slot [B,C] after
    // the first A and [C] after D; the branched cell resolves to C.
    LTGraph g = LTGraph::from_trace({"A", "D", "A"});
    g = g.apply(RemoveNode{2, 0});
    g = g.apply(InsertNode{{inserted_cell(BranchSet{"B", "C"})}, {0}, {1}});
    g = g.apply(InsertNode{{inserted_cell(BranchSet{"C"})}, {1}, {}});
    const Trace t{std::nullopt, {"A", "D", "A"}};
    const Alignment al = extract_alignment(g, t, CostFunction{});
    const std::vector<Move> expected{sync_move("A"), model_move("C"), sync_move("D"),
                                     model_move("C"), log_move("A")};
    REQUIRE(al.moves == expected);
    REQUIRE(al.cost == 3.0);
    REQUIRE(log_projection(al) == t.activities);
}

TEST_CASE("contradictory model is reported unsatisfiable") {
    for (const auto& trace : {std::vector<Activity>{}, std::vector<Activity>{"A"}}) {
        const auto r = run("Existence(1, A)\nAbsence(1, A)", trace);
        CAPTURE(trace);
        REQUIRE(r.outcome == AlignOutcome::Unsatisfiable);
        REQUIRE(!r.alignment);
        REQUIRE(r.stats.time_ms < 1000.0);
    }
}

TEST_CASE("already conforming trace aligns for free") {
    const auto r = run("Response(A, B)\nInit(A)", {"A", "B"});
    REQUIRE(r.outcome == AlignOutcome::Success);
    REQUIRE(r.alignment->cost == 0.0);
    const std::vector<Move> expected{sync_move("A"), sync_move("B")};
    REQUIRE(r.alignment->moves == expected);
}

TEST_CASE("empty trace gets the cheapest conforming sequence") {
    const auto r = run("Existence(2, A)", {});
    REQUIRE(r.outcome == AlignOutcome::Success);
    REQUIRE(r.alignment->cost == 2.0);
    const std::vector<Move> expected{model_move("A"), model_move("A")};
    REQUIRE(r.alignment->moves == expected);
}

TEST_CASE("asymmetric costs pick the cheap side") {
    SearchConfig cfg;
    cfg.cost_function.log_move["A"] = 3.0;
    cfg.cost_function.model_move["B"] = 0.5;
    const auto r = run("Response(A, B)", {"A"}, cfg);
    REQUIRE(r.outcome == AlignOutcome::Success);
    REQUIRE(r.alignment->cost == 0.5);
    const std::vector<Move> expected{sync_move("A"), model_move("B")};
    REQUIRE(r.alignment->moves == expected);
}

TEST_CASE("zero timeout reports a timeout on non-trivial input") {
    SearchConfig cfg;
    cfg.timeout_seconds = 0.0;
    const auto r = run("Response(A, B)", {"A"}, cfg);
    REQUIRE(r.outcome == AlignOutcome::Timeout);
    REQUIRE(r.stats.timed_out);
    REQUIRE(!r.alignment);
}

TEST_CASE("zero timeout still accepts a conforming trace") {
    SearchConfig cfg;
    cfg.timeout_seconds = 0.0;
    const auto r = run("Response(A, B)", {"A", "B"}, cfg);
    REQUIRE(r.outcome == AlignOutcome::Success);
}

TEST_CASE("adjacent chain pair is frozen before the search") {
    const Model m = parse_model(
        "Choice(ANC, L)\nChainPrecedence([ERT, ANC], RB)\nAbsence(2, IVA)\nChainResponse(IVA, "
        "RB)");
    const LTGraph start = LTGraph::from_trace({"ANC", "L", "IVA", "RB"});
    const LTGraph g = preprocess_chains(start, m);
    bool merged = false;
    for (const auto& n : g.nodes())
        if (n.chain.size() == 2 && n.chain[0].choices == BranchSet{"IVA"} &&
            n.chain[1].choices == BranchSet{"RB"})
            merged = true;
    REQUIRE(merged);
}

TEST_CASE("models without chain templates preprocess to the same graph") {
    const Model m = parse_model("Response(A, B)");
    const LTGraph start = LTGraph::from_trace({"A", "B", "A"});
    const LTGraph g = preprocess_chains(start, m);
    REQUIRE(g.canonical_fingerprint() == start.canonical_fingerprint());
}

TEST_CASE("every optimization toggle preserves the optimal cost") {
    struct Case {
        std::string model;
        std::vector<Activity> trace;
    };
    const std::vector<Case> cases{
        {"Response(A, [B, C])\nPrecedence(C, B)", {"A", "A"}},
        {"Choice(ANC, L)\nChainPrecedence([ERT, ANC], RB)\nAbsence(2, IVA)\nChainResponse(IVA, "
         "RB)",
         {"ANC", "L", "IVA", "RB"}},
        {"NotCoExistence(A, B)", {"A", "A", "B"}},
        {"NotChainResponse([C, D], D)\nExclusiveChoice([A, B], D)\nNotChainResponse(C, [B, D])",
         {"C", "C", "D", "D", "A", "C"}},
        {"ChainSuccession(A, B)\nExistence(2, B)", {"A", "A"}},
        {"AlternateResponse(A, B)\nEnd(B)", {"A", "B", "A"}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.model, c.trace);
        std::optional<double> reference;
        for (int mask = 0; mask < 8; ++mask) {
            SearchConfig cfg;
            cfg.early_pruning = mask & 1;
            cfg.chain_preprocessing = mask & 2;
            cfg.grouped_fixes = mask & 4;
            const auto r = run(c.model, c.trace, cfg);
            CAPTURE(mask);
            REQUIRE(r.outcome == AlignOutcome::Success);
            if (!reference) reference = r.alignment->cost;
            REQUIRE(r.alignment->cost == *reference);
        }
    }
}

TEST_CASE("pruning and grouping never discover extra states") {
    struct Case {
        std::string model;
        std::vector<Activity> trace;
    };
    const std::vector<Case> cases{
        {"Response(A, [B, C])\nPrecedence(C, B)", {"A", "A"}},
        {"NotCoExistence(A, B)", {"A", "A", "B"}},
        {"ChainSuccession(A, B)\nExistence(2, B)", {"A", "A"}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.model, c.trace);
        SearchConfig on, off;
        off.early_pruning = false;
        auto with = run(c.model, c.trace, on);
        auto without = run(c.model, c.trace, off);
        REQUIRE(with.stats.discovered_states <= without.stats.discovered_states);

        SearchConfig grouped, split;
        split.grouped_fixes = false;
        with = run(c.model, c.trace, grouped);
        without = run(c.model, c.trace, split);
        REQUIRE(with.stats.discovered_states <= without.stats.discovered_states);
    }
}

TEST_CASE("search agrees with exhaustive enumeration") {
    InstanceSpec spec;
    spec.alphabet_size = 4;
    spec.constraint_count = 3;
    spec.trace_length = 6;
    for (std::uint64_t seed = 500; seed < 540; ++seed) {
        spec.seed = seed;
        const Instance inst = generate_instance(spec);
        const auto truth = brute_force_align(inst.trace, inst.model, 6.0);
        const auto r = align(inst.trace, inst.model);
        CAPTURE(seed, inst.trace.activities, serialize_model(inst.model));
        if (truth) {
            REQUIRE(r.outcome == AlignOutcome::Success);
            REQUIRE_THAT(r.alignment->cost, Catch::Matchers::WithinAbs(truth->cost, 1e-9));
            REQUIRE(validate_alignment(*r.alignment, inst.trace, inst.model, CostFunction{}).ok());
        } else if (r.outcome == AlignOutcome::Success) {
            REQUIRE(r.alignment->cost > 6.0);
        }
    }
}

TEST_CASE("runs are deterministic") {
    const std::string model = "Response(A, [B, C])\nPrecedence(C, B)\nNotCoExistence(C, D)";
    const std::vector<Activity> trace{"A", "D", "A"};
    const auto a = run(model, trace);
    const auto b = run(model, trace);
    REQUIRE(a.outcome == b.outcome);
    REQUIRE(a.alignment->moves == b.alignment->moves);
    REQUIRE(a.stats.expanded_states == b.stats.expanded_states);
    REQUIRE(a.stats.discovered_states == b.stats.discovered_states);
}
