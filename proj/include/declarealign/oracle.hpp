#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>

#include "alignment.hpp"
#include "model.hpp"
#include "sequence_eval.hpp"

namespace declarealign {

// Bounds for randomly generated reference instances. Generation is a pure
// function of the spec, so a seed pins an instance forever.
struct InstanceSpec {
    std::size_t alphabet_size = 4;    // at most 8
    std::size_t constraint_count = 3;  // at most 6
    std::size_t trace_length = 6;      // at most 10
    std::vector<TemplateKind> template_pool{std::begin(all_template_kinds),
                                            std::end(all_template_kinds)};
    std::uint64_t seed = 0;
};

struct Instance {
    Trace trace;
    Model model;
};

namespace detail {

constexpr double kOracleEps = 1e-7;

inline std::size_t count_members(const std::vector<Activity>& s, const BranchSet& set) {
    std::size_t n = 0;
    for (const auto& a : s)
        if (set.contains(a)) ++n;
    return n;
}

inline bool occurs_in(const std::vector<Activity>& s, const BranchSet& set) {
    for (const auto& a : s)
        if (set.contains(a)) return true;
    return false;
}

// True when the freshly appended last symbol makes the constraint permanently
// unsatisfiable: no suffix can repair it. Assumes the prefix without the last
// symbol was not already doomed.
inline bool doomed_by_append(const Constraint& c, const std::vector<Activity>& s) {
    using K = TemplateKind;
    const std::size_t k = s.size() - 1;
    const Activity& x = s[k];
    const BranchSet& s1 = c.params[0];
    const BranchSet* s2 = c.params.size() > 1 ? &c.params[1] : nullptr;

    auto earlier_in = [&](const BranchSet& set) {
        for (std::size_t i = 0; i < k; ++i)
            if (set.contains(s[i])) return true;
        return false;
    };
    // scanning back from the appended symbol, which of the two sets shows first
    auto back_first = [&](const BranchSet& a, const BranchSet& b) -> int {
        for (std::size_t i = k; i-- > 0;) {
            if (a.contains(s[i])) return 1;
            if (b.contains(s[i])) return 2;
        }
        return 0;
    };

    auto alt_response_doom = [&](const BranchSet& act, const BranchSet& tgt) {
        // x in both sets answers the pending activation while restarting it
        return act.contains(x) && !tgt.contains(x) && back_first(act, tgt) == 1;
    };
    auto alt_precedence_doom = [&](const BranchSet& act, const BranchSet& tgt) {
        return act.contains(x) && back_first(tgt, act) != 1;
    };
    auto chain_response_doom = [&](const BranchSet& a, const BranchSet& b) {
        return k >= 1 && a.contains(s[k - 1]) && !b.contains(x);
    };
    auto chain_precedence_doom = [&](const BranchSet& a, const BranchSet& b) {
        return b.contains(x) && (k == 0 || !a.contains(s[k - 1]));
    };

    switch (c.kind) {
        case K::Existence:
        case K::Participation:
        case K::RespondedExistence:
        case K::CoExistence:
        case K::Response:
        case K::End:
        case K::Choice:
            return false;
        case K::Absence:
            return count_members(s, s1) > static_cast<std::size_t>(c.n) - 1;
        case K::AtMostOne:
            return count_members(s, s1) > 1;
        case K::Exactly:
            return count_members(s, s1) > static_cast<std::size_t>(c.n);
        case K::Init:
            return k == 0 && !s1.contains(x);
        case K::Precedence:
            return s2->contains(x) && !earlier_in(s1);
        case K::Succession:
            return s2->contains(x) && !earlier_in(s1);
        case K::AlternateResponse:
            return alt_response_doom(s1, *s2);
        case K::AlternatePrecedence:
            return alt_precedence_doom(*s2, s1);
        case K::AlternateSuccession:
            return alt_response_doom(s1, *s2) || alt_precedence_doom(*s2, s1);
        case K::ChainResponse:
            return chain_response_doom(s1, *s2);
        case K::ChainPrecedence:
            return chain_precedence_doom(s1, *s2);
        case K::ChainSuccession:
            return chain_response_doom(s1, *s2) || chain_precedence_doom(s1, *s2);
        case K::NotRespondedExistence:
        case K::NotCoExistence:
            return occurs_in(s, s1) && occurs_in(s, *s2);
        case K::NotResponse:
        case K::NotPrecedence:
        case K::NotSuccession:
            return s2->contains(x) && earlier_in(s1);
        case K::NotChainResponse:
        case K::NotChainPrecedence:
        case K::NotChainSuccession:
            return k >= 1 && s1.contains(s[k - 1]) && s2->contains(x);
        case K::ExclusiveChoice:
            return occurs_in(s, s1) && occurs_in(s, *s2);
    }
    return false;
}

struct OracleSearch {
    const Trace& t;
    const Model& m;
    const CostFunction& cf;
    std::vector<Activity> alphabet;
    double level = 0.0;

    std::vector<Activity> seq;
    std::vector<Move> moves;
    std::optional<Alignment> found;

    OracleSearch(const Trace& trace, const Model& model, const CostFunction& costs)
        : t(trace), m(model), cf(costs) {
        alphabet.assign(m.alphabet().begin(), m.alphabet().end());
    }

    bool appended_ok() const {
        for (const auto& c : m.constraints())
            if (doomed_by_append(c, seq)) return false;
        return true;
    }

    // still enough budget to reach the required occurrence counts
    bool counts_reachable(std::size_t cursor, double budget) const {
        for (const auto& c : m.constraints()) {
            std::size_t need = 0;
            if (c.kind == TemplateKind::Existence || c.kind == TemplateKind::Exactly)
                need = static_cast<std::size_t>(c.n);
            else if (c.kind == TemplateKind::Participation)
                need = 1;
            else
                continue;
            std::size_t have = count_members(seq, c.params[0]);
            for (std::size_t i = cursor; i < t.activities.size(); ++i)
                if (c.params[0].contains(t.activities[i])) ++have;
            if (have >= need) continue;
            const double min_each = cf.min_model_move_cost(c.params[0]);
            if (static_cast<double>(need - have) * min_each > budget + kOracleEps) return false;
        }
        return true;
    }

    // moves are explored sync, then log, then inserts; within one gap between
    // synchronous anchors all log moves come before all inserts, a canonical
    // form every alignment can be rewritten into without changing cost
    bool dfs(std::size_t cursor, double cost, bool inserted_in_gap) {
        if (cost > level + kOracleEps) return false;
        if (!counts_reachable(cursor, level - cost)) return false;

        if (cursor == t.activities.size() && std::abs(cost - level) <= kOracleEps &&
            satisfies_all(m, seq)) {
            found = Alignment{moves, cost};
            return true;
        }

        if (cursor < t.activities.size()) {
            const Activity& e = t.activities[cursor];
            // synchronous
            seq.push_back(e);
            moves.push_back(sync_move(e));
            if (appended_ok() && dfs(cursor + 1, cost, false)) return true;
            seq.pop_back();
            moves.pop_back();
            // log move (skip the event)
            if (!inserted_in_gap) {
                moves.push_back(log_move(e));
                if (dfs(cursor + 1, cost + cf.log_move_cost(e), false)) return true;
                moves.pop_back();
            }
        }
        // model move (insert)
        for (const auto& a : alphabet) {
            seq.push_back(a);
            moves.push_back(model_move(a));
            if (appended_ok() && dfs(cursor, cost + cf.model_move_cost(a), true)) return true;
            seq.pop_back();
            moves.pop_back();
        }
        return false;
    }
};

}  // namespace detail

// Reference aligner: provably minimal cost by exhaustive iterative deepening
// over every achievable total cost up to max_cost. Exponential by design; use
// on desk-scale instances only.
inline std::optional<Alignment> brute_force_align(const Trace& t, const Model& m,
                                                  double max_cost,
                                                  const CostFunction& cf = {}) {
    // all achievable totals: subset sums of log-move costs plus multiset sums
    // of model-move costs
    std::set<double> delete_sums{0.0};
    for (const auto& e : t.activities) {
        std::set<double> next = delete_sums;
        for (double d : delete_sums) {
            const double v = d + cf.log_move_cost(e);
            if (v <= max_cost + detail::kOracleEps) next.insert(v);
        }
        delete_sums = std::move(next);
    }
    std::set<double> insert_prices;
    for (const auto& a : m.alphabet()) insert_prices.insert(cf.model_move_cost(a));
    std::set<double> insert_sums{0.0};
    {
        std::vector<double> frontier{0.0};
        while (!frontier.empty()) {
            std::vector<double> next;
            for (double base : frontier)
                for (double p : insert_prices) {
                    const double v = base + p;
                    if (v <= max_cost + detail::kOracleEps && !insert_sums.count(v)) {
                        insert_sums.insert(v);
                        next.push_back(v);
                    }
                }
            frontier = std::move(next);
        }
    }
    std::set<double> levels;
    for (double d : delete_sums)
        for (double i : insert_sums)
            if (d + i <= max_cost + detail::kOracleEps) levels.insert(d + i);

    for (double level : levels) {
        detail::OracleSearch search(t, m, cf);
        search.level = level;
        if (search.dfs(0, 0.0, false)) return search.found;
    }
    return std::nullopt;
}

// Deterministic random instance drawing; resamples when the generated model
// does not admit any run reachable with a small insertion budget.
inline Instance generate_instance(const InstanceSpec& spec) {
    if (spec.alphabet_size < 1 || spec.alphabet_size > 8)
        throw std::invalid_argument("alphabet_size out of bounds");
    if (spec.constraint_count > 6)
        throw std::invalid_argument("constraint_count out of bounds");
    if (spec.trace_length > 10) throw std::invalid_argument("trace_length out of bounds");
    if (spec.template_pool.empty()) throw std::invalid_argument("empty template pool");

    static const std::vector<Activity> letters{"A", "B", "C", "D", "E", "F", "G", "H"};
    std::vector<Activity> alphabet(letters.begin(), letters.begin() + spec.alphabet_size);
    std::mt19937_64 rng(spec.seed);

    auto pick_activity = [&]() { return alphabet[rng() % alphabet.size()]; };
    auto pick_set = [&]() {
        const std::size_t size = alphabet.size() >= 2 && rng() % 2 == 0 ? 2 : 1;
        std::vector<Activity> members{pick_activity()};
        while (members.size() < size) {
            Activity a = pick_activity();
            if (a != members[0]) members.push_back(a);
        }
        return BranchSet{members};
    };

    for (int attempt = 0; attempt < 256; ++attempt) {
        Model model;
        for (std::size_t i = 0; i < spec.constraint_count; ++i) {
            const TemplateKind kind =
                spec.template_pool[rng() % spec.template_pool.size()];
            const TemplateTraits& tr = traits(kind);
            std::vector<BranchSet> params;
            for (std::size_t p = 0; p < tr.arity; ++p) params.push_back(pick_set());
            int n = 0;
            if (tr.counted)
                n = kind == TemplateKind::Absence ? 1 + static_cast<int>(rng() % 3)
                                                  : 1 + static_cast<int>(rng() % 2);
            model.add_constraint(make_constraint(kind, std::move(params), n));
        }
        std::vector<Activity> events;
        const std::size_t len = rng() % (spec.trace_length + 1);
        for (std::size_t i = 0; i < len; ++i) events.push_back(pick_activity());

        const Trace empty{std::nullopt, {}};
        if (attempt + 1 < 256 && !brute_force_align(empty, model, 6.0)) continue;
        return Instance{Trace{std::nullopt, std::move(events)}, std::move(model)};
    }
    throw std::logic_error("instance generation failed to converge");
}

}  // namespace declarealign
