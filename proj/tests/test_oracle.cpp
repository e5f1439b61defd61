#include <catch2/catch_amalgamated.hpp>

#include "declarealign/oracle.hpp"
#include "declarealign/parse.hpp"

using namespace declarealign;

namespace {

Trace make_trace(std::vector<Activity> events) { return Trace{std::nullopt, std::move(events)}; }

}  // namespace

TEST_CASE("reference aligner reproduces the published example costs") {
    SECTION("branched response with precedence costs one") {
        const Model m = parse_model("Response(A, [B, C])\nPrecedence(C, B)\n");
        const auto a = brute_force_align(make_trace({"A", "A"}), m, 5.0);
        REQUIRE(a);
        CHECK(a->cost == 1.0);
        CHECK(validate_alignment(*a, make_trace({"A", "A"}), m, {}).ok());
    }
    SECTION("hospital admission example costs two") {
        const Model m = parse_model(
            "Choice(ANC, L)\n"
            "ChainPrecedence([ERT, ANC], RB)\n"
            "Absence(2, IVA)\n"
            "ChainResponse(IVA, RB)\n");
        const Trace t = make_trace({"ANC", "L", "IVA", "RB"});
        const auto a = brute_force_align(t, m, 5.0);
        REQUIRE(a);
        CHECK(a->cost == 2.0);
        CHECK(validate_alignment(*a, t, m, {}).ok());
    }
}

TEST_CASE("a satisfying trace aligns at zero cost with only synchronous moves") {
    const Model m = parse_model("Response(A, B)\nInit(A)\n");
    const Trace t = make_trace({"A", "B"});
    const auto a = brute_force_align(t, m, 3.0);
    REQUIRE(a);
    CHECK(a->cost == 0.0);
    for (const auto& mv : a->moves) CHECK(mv.kind == MoveKind::Synchronous);
}

TEST_CASE("cost is stable once the budget admits a solution") {
    const Model m = parse_model("Response(A, [B, C])\nPrecedence(C, B)\n");
    const Trace t = make_trace({"A", "A"});
    CHECK_FALSE(brute_force_align(t, m, 0.0));
    const auto at1 = brute_force_align(t, m, 1.0);
    REQUIRE(at1);
    CHECK(at1->cost == 1.0);
    const auto at4 = brute_force_align(t, m, 4.0);
    REQUIRE(at4);
    CHECK(at4->cost == 1.0);
}

TEST_CASE("contradictory occurrence bounds admit no alignment") {
    const Model m = parse_model("Existence(1, A)\nAbsence(1, A)\n");
    CHECK_FALSE(brute_force_align(make_trace({"B", "A"}), m, 4.0));
    CHECK_FALSE(brute_force_align(make_trace({}), m, 4.0));
}

TEST_CASE("asymmetric costs change which repair is optimal") {
    const Model m = parse_model("Response(A, B)\n");
    CostFunction cf;
    cf.log_move["A"] = 3.0;
    cf.model_move["B"] = 0.5;
    const Trace t = make_trace({"A"});
    const auto a = brute_force_align(t, m, 4.0, cf);
    REQUIRE(a);
    CHECK(a->cost == 0.5);
    REQUIRE(a->moves.size() == 2);
    CHECK(a->moves[0].kind == MoveKind::Synchronous);
    CHECK(a->moves[1].kind == MoveKind::Model);
    CHECK(*a->moves[1].model == "B");
}

TEST_CASE("reference alignments always validate") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        InstanceSpec spec;
        spec.alphabet_size = 4;
        spec.constraint_count = 3;
        spec.trace_length = 5;
        spec.seed = seed;
        const Instance inst = generate_instance(spec);
        const auto a = brute_force_align(inst.trace, inst.model, 5.0);
        if (!a) continue;
        const auto report = validate_alignment(*a, inst.trace, inst.model, {});
        INFO("seed " << seed);
        CHECK(report.ok());
    }
}

TEST_CASE("instance generation is a pure function of the spec") {
    InstanceSpec spec;
    spec.alphabet_size = 5;
    spec.constraint_count = 4;
    spec.trace_length = 7;
    spec.seed = 1234;
    const Instance a = generate_instance(spec);
    const Instance b = generate_instance(spec);
    CHECK(a.trace.activities == b.trace.activities);
    CHECK(serialize_model(a.model) == serialize_model(b.model));
}

TEST_CASE("instance generation honours the template pool and bounds") {
    InstanceSpec spec;
    spec.template_pool = {TemplateKind::Response};
    spec.constraint_count = 1;
    spec.seed = 9;
    const Instance inst = generate_instance(spec);
    REQUIRE(inst.model.constraints().size() == 1);
    CHECK(inst.model.constraints()[0].kind == TemplateKind::Response);

    InstanceSpec bad;
    bad.alphabet_size = 9;
    CHECK_THROWS_AS(generate_instance(bad), std::invalid_argument);
    bad = InstanceSpec{};
    bad.constraint_count = 7;
    CHECK_THROWS_AS(generate_instance(bad), std::invalid_argument);
    bad = InstanceSpec{};
    bad.trace_length = 11;
    CHECK_THROWS_AS(generate_instance(bad), std::invalid_argument);
    bad = InstanceSpec{};
    bad.template_pool.clear();
    CHECK_THROWS_AS(generate_instance(bad), std::invalid_argument);
}

TEST_CASE("branch sets in generated constraints never exceed two members") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        InstanceSpec spec;
        spec.alphabet_size = 6;
        spec.constraint_count = 6;
        spec.seed = seed;
        const Instance inst = generate_instance(spec);
        for (const auto& c : inst.model.constraints())
            for (const auto& p : c.params) CHECK(p.size() <= 2);
    }
}
