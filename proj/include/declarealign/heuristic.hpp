#pragma once

#include <cstring>
#include <limits>

#include "repair.hpp"

namespace declarealign {

struct HeuristicResult {
    double estimate = 0.0;  // infinity when some activation has no action at all
    ProposalMap proposals;  // reusable by the search for expansion
};

namespace detail {

// Optimistic local merge: two actions that could plausibly be served by one.
// The merged cost never exceeds the sum of the parts; no cycle checking here,
// so the merge may be cheaper than any real combined repair.
inline std::optional<Action> merge_actions(const Action& a, const Action& b) {
    if (a.fixes == b.fixes)
        return Action{a.fixes, std::min(a.cost, b.cost), a.origin};

    // A single-cell insertion, possibly escorted by free structural fixes
    // (arcs, pins, merges, narrowing) that cost nothing.
    struct InsertForm {
        const InsertNode* ins = nullptr;
        std::vector<Fix> riders;
    };
    const auto insert_form = [](const Action& x) -> std::optional<InsertForm> {
        InsertForm form;
        for (const auto& fix : x.fixes) {
            if (const auto* ins = std::get_if<InsertNode>(&fix)) {
                if (form.ins || ins->cells.size() != 1) return std::nullopt;
                form.ins = ins;
            } else if (std::holds_alternative<RemoveNode>(fix)) {
                return std::nullopt;
            } else {
                form.riders.push_back(fix);
            }
        }
        if (!form.ins) return std::nullopt;
        return form;
    };
    if (const auto fa = insert_form(a)) {
        if (const auto fb = insert_form(b)) {
            const InsertNode* ia = fa->ins;
            const InsertNode* ib = fb->ins;
            // two escorted insertions rarely describe one placement; merging
            // them guts the estimate, so only merge when at most one side
            // carries riders
            if (!fa->riders.empty() && !fb->riders.empty()) return std::nullopt;
            const BranchSet common = ia->cells[0].choices.intersect(ib->cells[0].choices);
            if (common.empty()) return std::nullopt;
            std::vector<NodeId> preds = ia->preds, succs = ia->succs;
            for (NodeId p : ib->preds)
                if (std::find(preds.begin(), preds.end(), p) == preds.end()) preds.push_back(p);
            for (NodeId s : ib->succs)
                if (std::find(succs.begin(), succs.end(), s) == succs.end()) succs.push_back(s);
            for (NodeId p : preds)
                if (std::find(succs.begin(), succs.end(), p) != succs.end())
                    return std::nullopt;  // same node required on both sides
            std::sort(preds.begin(), preds.end());
            std::sort(succs.begin(), succs.end());
            std::vector<Fix> fixes = fa->riders;
            fixes.insert(fixes.end(), fb->riders.begin(), fb->riders.end());
            fixes.push_back(InsertNode{{inserted_cell(common)}, preds, succs});
            return Action{std::move(fixes), std::min(a.cost, b.cost), a.origin};
        }
    }

    // A lone insertion can double as one of the nodes added by an action that
    // inserts several, if their branch sets meet and the ordering constraints
    // agree; the shared node keeps only the common choices.
    const auto multi_merge = [&](const Action& multi,
                                 const Action& single) -> std::optional<Action> {
        const auto sf = insert_form(single);
        if (!sf) return std::nullopt;
        std::size_t insert_count = 0;
        for (const auto& f : multi.fixes)
            if (std::holds_alternative<InsertNode>(f)) ++insert_count;
        if (insert_count < 2) return std::nullopt;
        const InsertNode* si = sf->ins;
        for (std::size_t i = 0; i < multi.fixes.size(); ++i) {
            const auto* mi = std::get_if<InsertNode>(&multi.fixes[i]);
            if (!mi || mi->cells.size() != 1) continue;
            const BranchSet common = mi->cells[0].choices.intersect(si->cells[0].choices);
            if (common.empty()) continue;
            std::vector<NodeId> preds = mi->preds, succs = mi->succs;
            for (NodeId p : si->preds)
                if (std::find(preds.begin(), preds.end(), p) == preds.end()) preds.push_back(p);
            for (NodeId s : si->succs)
                if (std::find(succs.begin(), succs.end(), s) == succs.end()) succs.push_back(s);
            bool contradiction = false;
            for (NodeId p : preds)
                if (std::find(succs.begin(), succs.end(), p) != succs.end()) {
                    contradiction = true;
                    break;
                }
            if (contradiction) continue;
            std::sort(preds.begin(), preds.end());
            std::sort(succs.begin(), succs.end());
            std::vector<Fix> fixes = multi.fixes;
            fixes[i] = InsertNode{{inserted_cell(common)}, std::move(preds), std::move(succs)};
            for (const auto& r : sf->riders) fixes.push_back(r);
            return Action{std::move(fixes), std::max(multi.cost, single.cost), multi.origin};
        }
        return std::nullopt;
    };
    if (auto r = multi_merge(a, b)) return r;
    if (auto r = multi_merge(b, a)) return r;

    // One list containing the other's fixes outright means the bigger action
    // performs both repairs on its own.
    const auto subsumes = [](const Action& big, const Action& small) {
        std::vector<Fix> hay = big.fixes, needle = small.fixes;
        std::sort(hay.begin(), hay.end());
        std::sort(needle.begin(), needle.end());
        return std::includes(hay.begin(), hay.end(), needle.begin(), needle.end());
    };
    if (subsumes(a, b)) return a;
    if (subsumes(b, a)) return b;
    return std::nullopt;
}

// Multiset inclusion of fix lists: every fix of `small`, with multiplicity,
// appears in `big`.
inline bool fixes_subsume(const std::vector<Fix>& big, const std::vector<Fix>& small) {
    std::vector<Fix> hay = big, needle = small;
    std::sort(hay.begin(), hay.end());
    std::sort(needle.begin(), needle.end());
    return std::includes(hay.begin(), hay.end(), needle.begin(), needle.end());
}

// Cheap order-sensitive digest of a fix list, used to key heuristic states
// without comparing whole fix vectors.
inline std::uint64_t fix_digest(const std::vector<Fix>& fixes) {
    std::uint64_t h = 1469598103934665603ull;
    const auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    const auto mix_str = [&](const std::string& s) {
        for (const unsigned char ch : s) mix(ch);
        mix(0xFF);
    };
    const auto mix_set = [&](const BranchSet& bs) {
        for (const auto& m : bs.members()) mix_str(m);
        mix(0xFE);
    };
    for (const Fix& f : fixes) {
        mix(f.index());
        std::visit(
            [&](const auto& x) {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, InsertNode>) {
                    for (const auto& cell : x.cells) mix_set(cell.choices);
                    for (const NodeId p : x.preds) mix(p);
                    mix(0xFD);
                    for (const NodeId s : x.succs) mix(s);
                } else if constexpr (std::is_same_v<T, RemoveNode>) {
                    mix(x.node);
                    mix(x.cell);
                } else if constexpr (std::is_same_v<T, AddArc>) {
                    mix(x.from);
                    mix(x.to);
                } else if constexpr (std::is_same_v<T, PinNode>) {
                    mix(x.node);
                    mix(static_cast<std::uint64_t>(x.side));
                } else if constexpr (std::is_same_v<T, SubsetCell>) {
                    mix(x.node);
                    mix(x.cell);
                    mix_set(x.choices);
                } else if constexpr (std::is_same_v<T, MergeChains>) {
                    mix(x.front);
                    mix(x.back);
                } else if constexpr (std::is_same_v<T, SplitChain>) {
                    mix(x.node);
                    mix(x.cut);
                }
            },
            f);
    }
    return h;
}

}  // namespace detail

// Estimate of the remaining repair cost: the cheapest way to choose one action
// per violated activation, where structurally compatible choices may merge
// into a single shared action. Exact under the merge rule; the value is
// bracketed by the most expensive single activation below and by the
// no-sharing sum above.
inline HeuristicResult heuristic(const LTGraph& g, const Model& m,
                                 const std::vector<GraphActivation>& violated,
                                 const CostFunction& cf) {
    constexpr std::size_t kExpansionCap = 10000;
    const double inf = std::numeric_limits<double>::infinity();

    HeuristicResult result;
    result.proposals = propose_all(g, m, violated, cf);
    if (violated.empty()) return result;

    double floor = 0.0, ceiling = 0.0;
    for (const auto& [act, actions] : result.proposals) {
        double cheapest = inf;
        for (const auto& a : actions) cheapest = std::min(cheapest, a.cost);
        floor = std::max(floor, cheapest);
        ceiling += cheapest;
    }
    if (std::isinf(floor)) {
        result.estimate = inf;
        return result;
    }

    // Layered search: activations are covered in a fixed order, so every
    // partial state covers a prefix. States within a layer are keyed by their
    // chosen actions (as a multiset of fix lists); equal keys keep the cheaper
    // cost. Merging can lower a state's cost, so layers are swept in order
    // rather than popping a cost-ordered queue.
    const auto order = activation_order(violated, result.proposals, m);

    // Distinct actions live once in a pool; DP states reference them by id, so
    // copying a state copies a handful of integers.
    std::vector<Action> pool;
    std::map<std::uint64_t, std::uint32_t> pool_ids;
    const auto intern = [&](const Action& a) -> std::uint32_t {
        // same fixes at a different stated cost (a cheaper merge) is a
        // distinct entry
        std::uint64_t tag = detail::fix_digest(a.fixes);
        std::uint64_t cost_bits;
        std::memcpy(&cost_bits, &a.cost, sizeof cost_bits);
        tag ^= cost_bits * 0x9E3779B97F4A7C15ull;
        auto it = pool_ids.find(tag);
        if (it != pool_ids.end()) return it->second;
        pool.push_back(a);
        pool_ids.emplace(tag, static_cast<std::uint32_t>(pool.size() - 1));
        return static_cast<std::uint32_t>(pool.size() - 1);
    };

    struct HState {
        std::vector<std::uint32_t> ids;
        double cost = 0.0;
    };
    using StateKey = std::vector<std::uint32_t>;
    const auto key_of = [](const HState& s) {
        StateKey k = s.ids;
        std::sort(k.begin(), k.end());
        return k;
    };

    // The same (chosen, option) pairs are probed across thousands of DP
    // states; memoize merge and subsumption outcomes by id pair.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::optional<std::uint32_t>> merge_memo;
    std::map<std::pair<std::uint32_t, std::uint32_t>, bool> subsume_memo;
    const auto merged_pair = [&](std::uint32_t x, std::uint32_t y) {
        const auto key = std::minmax(x, y);
        auto it = merge_memo.find(key);
        if (it == merge_memo.end()) {
            auto merged = detail::merge_actions(pool[x], pool[y]);
            std::optional<std::uint32_t> id;
            if (merged) id = intern(*merged);
            it = merge_memo.emplace(key, id).first;
        }
        return it->second;
    };
    const auto subsumes_pair = [&](std::uint32_t big, std::uint32_t small) {
        const auto key = std::make_pair(big, small);
        auto it = subsume_memo.find(key);
        if (it == subsume_memo.end())
            it = subsume_memo.emplace(key, detail::fixes_subsume(pool[big].fixes,
                                                                 pool[small].fixes))
                     .first;
        return it->second;
    };

    std::map<StateKey, HState> layer;
    layer.emplace(StateKey{}, HState{});
    std::size_t expansions = 0;
    bool capped = false;
    for (const auto& act : order) {
        const auto& options = result.proposals.at(act);
        std::vector<std::uint32_t> option_ids;
        option_ids.reserve(options.size());
        for (const auto& option : options) option_ids.push_back(intern(option));
        std::map<StateKey, HState> next;
        const auto offer = [&](HState&& child) {
            StateKey k = key_of(child);
            auto it = next.find(k);
            if (it == next.end())
                next.emplace(std::move(k), std::move(child));
            else if (child.cost < it->second.cost)
                it->second = std::move(child);
        };
        for (const auto& [k, state] : layer) {
            if (++expansions > kExpansionCap) {
                capped = true;
                break;
            }
            for (const std::uint32_t oid : option_ids) {
                HState fresh = state;
                fresh.ids.push_back(oid);
                fresh.cost += pool[oid].cost;
                offer(std::move(fresh));
                for (std::size_t j = 0; j < state.ids.size(); ++j) {
                    const auto merged = merged_pair(state.ids[j], oid);
                    if (!merged) continue;
                    HState child = state;
                    child.cost = child.cost - pool[state.ids[j]].cost + pool[*merged].cost;
                    child.ids[j] = *merged;
                    offer(std::move(child));
                }
                // a grouped action can stand in for every chosen action whose
                // fixes it already contains
                {
                    HState child;
                    child.cost = pool[oid].cost;
                    bool absorbed_any = false;
                    for (const std::uint32_t cid : state.ids) {
                        if (cid == oid || subsumes_pair(oid, cid)) {
                            absorbed_any = true;
                            continue;
                        }
                        child.ids.push_back(cid);
                        child.cost += pool[cid].cost;
                    }
                    if (absorbed_any) {
                        child.ids.push_back(oid);
                        offer(std::move(child));
                    }
                }
            }
        }
        if (capped) break;
        layer = std::move(next);
    }

    if (capped) {
        result.estimate = floor;
        return result;
    }
    double best = inf;
    for (const auto& [k, state] : layer) best = std::min(best, state.cost);
    result.estimate = std::clamp(best, floor, ceiling);
    return result;
}

}  // namespace declarealign
