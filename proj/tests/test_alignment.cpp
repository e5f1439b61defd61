#include <catch2/catch_amalgamated.hpp>

#include "declarealign/alignment.hpp"
#include "declarealign/parse.hpp"

using namespace declarealign;

TEST_CASE("cost function defaults to one and honours overrides") {
    CostFunction cf;
    CHECK(cf.model_move_cost("A") == 1.0);
    CHECK(cf.log_move_cost("A") == 1.0);
    CHECK(cf.uniform());

    cf.model_move["B"] = 2.5;
    cf.log_move["C"] = 0.5;
    CHECK(cf.model_move_cost("B") == 2.5);
    CHECK(cf.model_move_cost("A") == 1.0);
    CHECK(cf.log_move_cost("C") == 0.5);
    CHECK_FALSE(cf.uniform());

    CHECK(cf.min_model_move_cost(BranchSet{"A", "B"}) == 1.0);
    CHECK(cf.min_model_move_cost(BranchSet{"B"}) == 2.5);
}

TEST_CASE("projections split an alignment into its two sequences") {
    Alignment a;
    a.moves = {sync_move("A"), log_move("B"), model_move("C"), sync_move("D")};
    CHECK(log_projection(a) == std::vector<Activity>{"A", "B", "D"});
    CHECK(model_projection(a) == std::vector<Activity>{"A", "C", "D"});
}

TEST_CASE("alignment cost sums only asynchronous moves") {
    CostFunction cf;
    cf.log_move["B"] = 3.0;
    cf.model_move["C"] = 2.0;
    Alignment a;
    a.moves = {sync_move("A"), log_move("B"), model_move("C")};
    CHECK(alignment_cost(a, cf) == 5.0);
    a.moves = {sync_move("A")};
    CHECK(alignment_cost(a, cf) == 0.0);
}

TEST_CASE("validation checks log projection, model satisfaction and cost") {
    const Model m = parse_model("Response(A, B)\n");
    const Trace t{std::nullopt, {"A"}};
    CostFunction cf;

    Alignment good;
    good.moves = {sync_move("A"), model_move("B")};
    good.cost = 1.0;
    CHECK(validate_alignment(good, t, m, cf).ok());

    SECTION("wrong log projection") {
        Alignment a = good;
        a.moves[0] = sync_move("X");
        auto r = validate_alignment(a, t, m, cf);
        CHECK_FALSE(r.log_matches);
    }
    SECTION("model projection violates the model") {
        Alignment a;
        a.moves = {sync_move("A")};
        a.cost = 0.0;
        auto r = validate_alignment(a, t, m, cf);
        CHECK(r.log_matches);
        CHECK_FALSE(r.model_satisfied);
    }
    SECTION("declared cost must match the recomputed cost") {
        Alignment a = good;
        a.cost = 2.0;
        auto r = validate_alignment(a, t, m, cf);
        CHECK_FALSE(r.cost_matches);
        CHECK(r.log_matches);
    }
    SECTION("malformed moves fail validation") {
        Alignment a = good;
        a.moves.push_back(Move{MoveKind::Synchronous, std::string("A"), std::string("B")});
        CHECK_FALSE(validate_alignment(a, t, m, cf).ok());
    }
}
