#pragma once

#include <chrono>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>

#include "alignment.hpp"
#include "heuristic.hpp"

namespace declarealign {

struct SearchConfig {
    bool early_pruning = true;
    bool chain_preprocessing = true;
    bool grouped_fixes = true;
    double timeout_seconds = 300.0;
    CostFunction cost_function;
};

enum class AlignOutcome { Success, Timeout, Unsatisfiable };

struct SearchStats {
    std::size_t expanded_states = 0;
    std::size_t discovered_states = 0;
    double time_ms = 0.0;
    bool timed_out = false;
};

struct AlignResult {
    AlignOutcome outcome = AlignOutcome::Unsatisfiable;
    std::optional<Alignment> alignment;
    SearchStats stats;
};

namespace detail {

// true when the adjacent original pair (x then y) actively locks c into a
// satisfied reading, making the adjacency worth freezing
inline bool chain_pair_lock(const Constraint& c, const Activity& x, const Activity& y) {
    const BranchSet& s1 = c.params[0];
    switch (c.kind) {
        case TemplateKind::ChainResponse:
        case TemplateKind::ChainPrecedence:
        case TemplateKind::ChainSuccession:
            return s1.contains(x) && c.params[1].contains(y);
        case TemplateKind::NotChainResponse:
            return s1.contains(x) && !c.params[1].contains(y);
        case TemplateKind::NotChainPrecedence:
            return c.params[1].contains(y) && !s1.contains(x);
        case TemplateKind::NotChainSuccession:
            return (s1.contains(x) && !c.params[1].contains(y)) ||
                   (c.params[1].contains(y) && !s1.contains(x));
        default:
            return false;
    }
}

using ActivationKey = std::tuple<std::size_t, std::optional<Site>, bool, BranchSet>;

inline std::set<ActivationKey> activation_keys(const LTGraph& g, const Model& m) {
    std::set<ActivationKey> out;
    for (const auto& a : violated_activations(g, m))
        out.insert({a.constraint_index, a.site, a.second_side, a.triggering_members});
    return out;
}

}  // namespace detail

// Merge trace-adjacent originals whose adjacency already locks a chain
// constraint into satisfaction, so the search cannot be tempted to slide new
// nodes between them. A merge is undone when it makes any constraint report a
// violation that was not there before.
inline LTGraph preprocess_chains(const LTGraph& start, const Model& m) {
    bool any_chain = false;
    for (const auto& c : m.constraints())
        if (c.kind == TemplateKind::ChainResponse || c.kind == TemplateKind::ChainPrecedence ||
            c.kind == TemplateKind::ChainSuccession ||
            c.kind == TemplateKind::NotChainResponse ||
            c.kind == TemplateKind::NotChainPrecedence ||
            c.kind == TemplateKind::NotChainSuccession)
            any_chain = true;
    if (!any_chain) return start;

    // locate each original position and its current node
    std::map<std::size_t, Activity> activity_at;
    std::map<std::size_t, NodeId> holder;
    for (const auto& n : start.nodes())
        for (const auto& cell : n.chain)
            if (cell.original()) {
                activity_at[*cell.trace_index] = cell.choices.members().front();
                holder[*cell.trace_index] = n.id;
            }
    if (activity_at.empty()) return start;

    LTGraph g = start;
    const std::size_t last = activity_at.rbegin()->first;
    for (std::size_t i = 0; i + 1 <= last; ++i) {
        if (!activity_at.count(i) || !activity_at.count(i + 1)) continue;
        const NodeId u = holder[i], v = holder[i + 1];
        if (u == v) continue;
        bool wanted = false;
        for (const auto& c : m.constraints())
            if (detail::chain_pair_lock(c, activity_at[i], activity_at[i + 1])) wanted = true;
        if (!wanted) continue;

        const auto before = detail::activation_keys(g, m);
        const std::size_t u_len = g.node(u).chain.size();
        LTGraph merged;
        try {
            merged = g.apply(MergeChains{u, v});
        } catch (const std::invalid_argument&) {
            continue;
        }
        if (merged.has_cycle()) continue;

        // activations that sat on v now sit at the tail of u
        std::set<detail::ActivationKey> expected;
        for (auto key : before) {
            auto& site = std::get<1>(key);
            if (site && site->node == v) site = Site{u, u_len + site->cell};
            expected.insert(std::move(key));
        }
        bool grew = false;
        for (const auto& key : detail::activation_keys(merged, m))
            if (!expected.count(key)) grew = true;
        if (grew) continue;

        g = std::move(merged);
        for (auto& [pos, h] : holder)
            if (h == v) h = u;
    }
    return g;
}

// Deterministic read-off of the goal graph: originals become synchronous
// moves at their trace positions, missing trace positions become log moves,
// inserted cells become model moves. Branched inserts resolve to the
// lexicographically largest member of minimum cost.
inline Alignment extract_alignment(const LTGraph& goal, const Trace& trace,
                                   const CostFunction& cf) {
    Alignment out;
    std::size_t cursor = 0;
    for (const Site& s : goal.topological_sites()) {
        const Cell& cell = goal.cell(s);
        if (cell.original()) {
            if (*cell.trace_index < cursor)
                throw std::logic_error("alignment extraction: originals out of order");
            while (cursor < *cell.trace_index)
                out.moves.push_back(log_move(trace.activities[cursor++]));
            out.moves.push_back(sync_move(trace.activities[cursor++]));
        } else {
            double best = std::numeric_limits<double>::infinity();
            Activity pick;
            for (const auto& a : cell.choices.members()) {
                const double c = cf.model_move_cost(a);
                if (c < best - 1e-12 || (std::abs(c - best) <= 1e-12 && a > pick)) {
                    best = c;
                    pick = a;
                }
            }
            out.moves.push_back(model_move(pick));
        }
    }
    while (cursor < trace.activities.size())
        out.moves.push_back(log_move(trace.activities[cursor++]));
    out.cost = alignment_cost(out, cf);
    return out;
}

// A* over repair states. Each state is a graph; expanding applies every
// proposed action of one chosen violated activation. Toggles: early_pruning
// drops children whose heuristic is infinite, chain_preprocessing merges
// locked adjacencies up front, grouped_fixes off subdivides each action into
// a chain of single-fix states that owe the action's remaining fixes.
inline AlignResult align(const Trace& trace, const Model& m, const SearchConfig& cfg = {}) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    const auto elapsed_s = [&] {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    };
    constexpr double kEps = 1e-9;

    AlignResult res;
    const CostFunction& cf = cfg.cost_function;

    struct Rec {
        LTGraph graph;
        std::string fingerprint;
        double g = 0.0;
        std::vector<GraphActivation> violated;
        ProposalMap proposals;
        std::vector<Fix> continuation;  // rest of a decomposed action (ablation mode)
    };
    std::vector<Rec> arena;
    using Key = std::tuple<double, double, std::size_t>;  // f, -g, arrival
    std::priority_queue<std::pair<Key, std::size_t>, std::vector<std::pair<Key, std::size_t>>,
                        std::greater<>>
        open;
    std::map<std::string, double> best_g;

    // Mid-decomposition states keep the priority of the expansion that spawned
    // their chain (clamped below by g): the chain then drains at the same
    // point of the search where the whole action would have been applied, and
    // the priority never exceeds the best completion through the state, so
    // optimality is unaffected.
    const auto discover = [&](LTGraph&& graph, double gcost, bool is_root,
                              std::vector<Fix> continuation = {},
                              std::optional<double> inherited_f = {}) {
        std::string fp = graph.canonical_fingerprint();
        // a mid-decomposition state is only interchangeable with states that
        // still owe the same fixes, so the pending tail joins its identity
        if (!continuation.empty())
            fp += "|owes:" + std::to_string(detail::fix_digest(continuation));
        {
            const auto it = best_g.find(fp);
            if (it != best_g.end() && it->second <= gcost + kEps) return;
        }
        auto violated = violated_activations(graph, m);
        HeuristicResult hr;
        if (!inherited_f) {
            hr = heuristic(graph, m, violated, cf);
            if (!is_root && cfg.early_pruning && std::isinf(hr.estimate)) return;
        }
        const bool fresh = !best_g.count(fp);
        best_g[fp] = gcost;
        arena.push_back(Rec{std::move(graph), std::move(fp), gcost, std::move(violated),
                            std::move(hr.proposals), std::move(continuation)});
        const std::size_t idx = arena.size() - 1;
        const double f = inherited_f ? std::max(gcost, *inherited_f) : gcost + hr.estimate;
        open.push({{f, -gcost, idx}, idx});
        if (fresh) ++res.stats.discovered_states;
    };

    const auto finish = [&](AlignOutcome outcome) {
        res.outcome = outcome;
        res.stats.time_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        return res;
    };

    LTGraph start = LTGraph::from_trace(trace.activities);
    if (cfg.chain_preprocessing) start = preprocess_chains(start, m);
    discover(std::move(start), 0.0, true);

    while (!open.empty()) {
        const auto [key, idx] = open.top();
        open.pop();
        if (best_g.at(arena[idx].fingerprint) < arena[idx].g - kEps) continue;  // superseded
        ++res.stats.expanded_states;

        if (arena[idx].violated.empty()) {
            Alignment al = extract_alignment(arena[idx].graph, trace, cf);
            if (std::abs(al.cost - arena[idx].g) > 1e-6)
                throw std::logic_error("alignment cost disagrees with search cost");
            if (!validate_alignment(al, trace, m, cf).ok())
                throw std::logic_error("extracted alignment failed validation");
            res.alignment = std::move(al);
            return finish(AlignOutcome::Success);
        }
        if (elapsed_s() > cfg.timeout_seconds) {
            res.stats.timed_out = true;
            return finish(AlignOutcome::Timeout);
        }

        // a mid-decomposition state continues its chain and offers nothing else
        if (!arena[idx].continuation.empty()) {
            const std::vector<Fix> owed = arena[idx].continuation;
            const LTGraph parent = arena[idx].graph;
            const double pg = arena[idx].g;
            const double step = detail::fix_cost(parent, owed.front(), cf);
            LTGraph child;
            try {
                child = parent.apply(owed.front());
            } catch (const std::invalid_argument&) {
                continue;
            }
            if (child.has_cycle()) continue;
            if (owed.size() == 1) {
                discover(std::move(child), pg + step, false);
            } else {
                discover(std::move(child), pg + step, false,
                         std::vector<Fix>(owed.begin() + 1, owed.end()), std::get<0>(key));
            }
            continue;
        }

        const auto chosen = select_activation(arena[idx].violated, arena[idx].proposals, m);
        if (!chosen) throw std::logic_error("violated state without a selectable activation");
        // children reallocate the arena; detach what expansion needs
        const std::vector<Action> actions = arena[idx].proposals.at(*chosen);
        const LTGraph parent = arena[idx].graph;
        const double pg = arena[idx].g;

        for (const Action& a : actions) {
            if (a.fixes.empty()) continue;
            if (cfg.grouped_fixes) {
                LTGraph child;
                try {
                    child = parent.apply_all(a.fixes);
                } catch (const std::invalid_argument&) {
                    continue;
                }
                if (child.has_cycle()) continue;
                discover(std::move(child), pg + a.cost, false);
            } else {
                const double step = detail::fix_cost(parent, a.fixes.front(), cf);
                LTGraph child;
                try {
                    child = parent.apply(a.fixes.front());
                } catch (const std::invalid_argument&) {
                    continue;
                }
                if (child.has_cycle()) continue;
                if (a.fixes.size() == 1) {
                    discover(std::move(child), pg + step, false);
                } else {
                    discover(std::move(child), pg + step, false,
                             std::vector<Fix>(a.fixes.begin() + 1, a.fixes.end()),
                             std::get<0>(key));
                }
            }
        }
    }
    return finish(AlignOutcome::Unsatisfiable);
}

}  // namespace declarealign
