#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "alignment.hpp"
#include "graph_eval.hpp"

namespace declarealign {

// One candidate repair step: a fix sequence applied atomically to the graph.
// Only insertions and removals carry cost; narrowing, ordering, pinning,
// merging and splitting are free.
struct Action {
    std::vector<Fix> fixes;
    double cost = 0.0;
    GraphActivation origin;
};

using ProposalMap = std::map<GraphActivation, std::vector<Action>>;

namespace detail {

inline double fix_cost(const LTGraph& g, const Fix& f, const CostFunction& cf) {
    if (const auto* ins = std::get_if<InsertNode>(&f)) {
        double total = 0.0;
        for (const auto& cell : ins->cells) total += cf.min_model_move_cost(cell.choices);
        return total;
    }
    if (const auto* rm = std::get_if<RemoveNode>(&f)) {
        const Cell& cell = g.cell({rm->node, rm->cell});
        return cell.original() ? cf.log_move_cost(cell.choices.members().front())
                               : cf.min_model_move_cost(cell.choices);
    }
    return 0.0;
}

// Where a cell ends up after one fix: a removal shifts later cells of the same
// node left (and deletes the tracked cell when it is the target), a merge
// re-homes the back chain behind the front one, a split moves the tail cells to
// the freshly allocated node. `g` must be the graph the fix is about to apply to.
inline std::optional<Site> track_site(const LTGraph& g, Site s, const Fix& f) {
    if (const auto* rm = std::get_if<RemoveNode>(&f)) {
        if (rm->node != s.node || rm->cell > s.cell) return s;
        if (rm->cell == s.cell) return std::nullopt;
        return Site{s.node, s.cell - 1};
    }
    if (const auto* mg = std::get_if<MergeChains>(&f)) {
        if (s.node != mg->back) return s;
        return Site{mg->front, g.node(mg->front).chain.size() + s.cell};
    }
    if (const auto* sp = std::get_if<SplitChain>(&f)) {
        if (s.node != sp->node || s.cell < sp->cut) return s;
        return Site{g.next_id(), s.cell - sp->cut};
    }
    return s;
}

// Validate a candidate by applying it: reject ill-formed fix sequences, cyclic
// results, and sequences that leave the origin activation in place. Persistence
// is judged at the origin site's image under the fixes, not its raw
// coordinates, so removing one cell of a chain is not confused with the
// neighbour that slides into its place. The cost is accumulated against the
// evolving graph so removals are priced exactly.
inline std::optional<Action> finish_action(const LTGraph& g, const Constraint& c,
                                           const GraphActivation& origin,
                                           const std::vector<Fix>& fixes,
                                           const CostFunction& cf) {
    if (fixes.empty()) return std::nullopt;
    LTGraph h = g;
    double cost = 0.0;
    std::optional<Site> image = origin.site;
    bool origin_deleted = false;
    try {
        for (const Fix& f : fixes) {
            cost += fix_cost(h, f, cf);
            if (image) {
                const auto moved = track_site(h, *image, f);
                if (!moved) {
                    origin_deleted = true;
                    image.reset();
                } else {
                    image = moved;
                }
            }
            h = h.apply(f);
        }
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
    if (h.has_cycle()) return std::nullopt;
    if (!origin_deleted)
        for (const auto& a : violated_activations(h, c, origin.constraint_index))
            if (a.site == image && a.second_side == origin.second_side) return std::nullopt;
    return Action{fixes, cost, origin};
}

// Members of `set` grouped by insertion price, cheapest class first.
inline std::vector<BranchSet> cost_classes(const BranchSet& set, const CostFunction& cf) {
    std::map<double, std::vector<Activity>> by_cost;
    for (const auto& m : set.members()) by_cost[cf.model_move_cost(m)].push_back(m);
    std::vector<BranchSet> out;
    for (auto& [cost, members] : by_cost) out.push_back(BranchSet{std::move(members)});
    return out;
}

// All size-k multisets over {0..n-1}, capped.
inline std::vector<std::vector<std::size_t>> index_multisets(std::size_t n, std::size_t k,
                                                             std::size_t cap) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    auto rec = [&](auto&& self, std::size_t start) -> void {
        if (out.size() >= cap) return;
        if (cur.size() == k) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = start; i < n; ++i) {
            cur.push_back(i);
            self(self, i);
            cur.pop_back();
        }
    };
    if (n > 0 && k > 0) rec(rec, 0);
    return out;
}

// All size-k subsets of {0..n-1}, capped.
inline std::vector<std::vector<std::size_t>> index_subsets(std::size_t n, std::size_t k,
                                                           std::size_t cap) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    auto rec = [&](auto&& self, std::size_t start) -> void {
        if (out.size() >= cap) return;
        if (cur.size() == k) {
            out.push_back(cur);
            return;
        }
        if (n - start < k - cur.size()) return;
        for (std::size_t i = start; i < n; ++i) {
            cur.push_back(i);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    if (k == 0)
        out.push_back({});
    else if (k <= n)
        rec(rec, 0);
    return out;
}

// Cartesian product of per-slot fix alternatives, capped.
inline std::vector<std::vector<Fix>> fix_products(
    const std::vector<std::vector<std::vector<Fix>>>& slots, std::size_t cap) {
    std::vector<std::vector<Fix>> out{{}};
    for (const auto& options : slots) {
        std::vector<std::vector<Fix>> next;
        for (const auto& base : out)
            for (const auto& opt : options) {
                if (next.size() >= cap) break;
                auto combined = base;
                combined.insert(combined.end(), opt.begin(), opt.end());
                next.push_back(std::move(combined));
            }
        out = std::move(next);
        if (out.empty()) return out;
    }
    return out;
}

// Generates the candidate fix sequences for one activation. Candidates may be
// individually unsound; finish_action() filters them afterwards.
struct Proposer {
    const LTGraph& g;
    const Constraint& c;
    const GraphActivation& act;
    const CostFunction& cf;
    const BranchSet& universe;  // activities insertable as buffers (model alphabet)
    SiteRelations rel;
    std::vector<std::vector<Fix>> candidates;

    static constexpr std::size_t kEnumCap = 48;
    static constexpr std::size_t kMaxDangers = 5;

    Proposer(const LTGraph& graph, const Constraint& con, const GraphActivation& activation,
             const CostFunction& costs, const BranchSet& insertable)
        : g(graph), c(con), act(activation), cf(costs), universe(insertable), rel(graph) {}

    void add(std::vector<Fix> fixes) {
        if (!fixes.empty()) candidates.push_back(std::move(fixes));
    }

    // Narrow `bad` out of the cell if something remains, otherwise drop it.
    std::vector<Fix> neutralize(const Site& s, const BranchSet& bad) const {
        const BranchSet rest = g.cell(s).choices.subtract(bad);
        if (!rest.empty()) return {SubsetCell{s.node, s.cell, rest}};
        return {RemoveNode{s.node, s.cell}};
    }

    // Sites ordered latest-first so grouped cell removals keep indexes valid.
    std::vector<Site> descending(std::vector<Site> sites) const {
        std::sort(sites.begin(), sites.end(), [&](const Site& a, const Site& b) {
            return rel.rank.at(a) > rel.rank.at(b);
        });
        return sites;
    }

    void run() {
        using K = TemplateKind;
        switch (c.kind) {
            case K::Existence:
            case K::Participation:
                existence_deficit(c.kind == K::Participation ? 1
                                                             : static_cast<std::size_t>(c.n));
                break;
            case K::Absence:
            case K::AtMostOne:
                occurrence_excess(c.kind == K::AtMostOne ? 1
                                                         : static_cast<std::size_t>(c.n) - 1);
                break;
            case K::Exactly:
                exact_count(static_cast<std::size_t>(c.n));
                break;
            case K::Init:
                boundary_pin(true);
                break;
            case K::End:
                boundary_pin(false);
                break;
            case K::Choice:
                choice();
                break;
            case K::ExclusiveChoice:
                exclusive_choice();
                break;
            case K::RespondedExistence:
                anywhere_target(c.params[1]);
                break;
            case K::CoExistence:
                anywhere_target(act.second_side ? c.params[0] : c.params[1]);
                break;
            case K::Response:
                ordered_target(c.params[1], true);
                break;
            case K::Precedence:
                ordered_target(c.params[0], false);
                break;
            case K::Succession:
                if (act.second_side)
                    ordered_target(c.params[0], false);
                else
                    ordered_target(c.params[1], true);
                break;
            case K::AlternateResponse:
                alternate_target(c.params[0], c.params[1], true);
                break;
            case K::AlternatePrecedence:
                alternate_target(c.params[1], c.params[0], false);
                break;
            case K::AlternateSuccession:
                if (act.second_side)
                    alternate_target(c.params[1], c.params[0], false);
                else
                    alternate_target(c.params[0], c.params[1], true);
                break;
            case K::ChainResponse:
                chain_target(c.params[1], true);
                break;
            case K::ChainPrecedence:
                chain_target(c.params[0], false);
                break;
            case K::ChainSuccession:
                if (act.second_side)
                    chain_target(c.params[0], false);
                else
                    chain_target(c.params[1], true);
                break;
            case K::NotRespondedExistence:
            case K::NotCoExistence:
                side_removals();
                break;
            case K::NotResponse:
                forbid_target(c.params[1], true);
                break;
            case K::NotPrecedence:
                forbid_target(c.params[0], false);
                break;
            case K::NotSuccession:
                if (act.second_side)
                    forbid_target(c.params[0], false);
                else
                    forbid_target(c.params[1], true);
                break;
            case K::NotChainResponse:
                forbid_chain_target(c.params[1], true);
                break;
            case K::NotChainPrecedence:
                forbid_chain_target(c.params[0], false);
                break;
            case K::NotChainSuccession:
                if (act.second_side)
                    forbid_chain_target(c.params[0], false);
                else
                    forbid_chain_target(c.params[1], true);
                break;
        }
    }

    // ---- counting templates --------------------------------------------

    std::vector<Site> can_sites(const BranchSet& set) const {
        std::vector<Site> out;
        for (const auto& s : rel.sites)
            if (rel.can_be(s, set)) out.push_back(s);
        return out;
    }

    void add_insertions(std::size_t count, const BranchSet& from,
                        std::vector<Fix> prefix = {}) {
        const auto classes = cost_classes(from, cf);
        if (classes.empty() || count == 0) {
            add(std::move(prefix));
            return;
        }
        for (const auto& combo : index_multisets(classes.size(), count, kEnumCap)) {
            auto fixes = prefix;
            for (std::size_t idx : combo)
                fixes.push_back(InsertNode{{inserted_cell(classes[idx])}, {}, {}});
            add(std::move(fixes));
        }
    }

    void existence_deficit(std::size_t n) {
        const BranchSet& s1 = c.params[0];
        std::size_t must = 0;
        for (const auto& s : rel.sites)
            if (rel.must_be(s, s1)) ++must;
        if (must >= n) return;
        const std::size_t deficit = n - must;

        add_insertions(deficit, s1);

        // promote inserted branched cells that can already resolve into the set
        std::vector<Site> promotable;
        for (const auto& s : rel.sites) {
            const Cell& cell = g.cell(s);
            if (!cell.original() && cell.choices.intersects(s1) &&
                !cell.choices.subset_of(s1))
                promotable.push_back(s);
        }
        if (!promotable.empty()) {
            std::vector<Fix> fixes;
            const std::size_t take = std::min(deficit, promotable.size());
            for (std::size_t i = 0; i < take; ++i) {
                const Cell& cell = g.cell(promotable[i]);
                fixes.push_back(SubsetCell{promotable[i].node, promotable[i].cell,
                                           cell.choices.intersect(s1)});
            }
            add_insertions(deficit - take, s1, std::move(fixes));
        }
    }

    void occurrence_excess(std::size_t allowed) {
        const BranchSet& s1 = c.params[0];
        const auto sites = can_sites(s1);
        if (sites.size() <= allowed) return;
        const std::size_t excess = sites.size() - allowed;

        std::vector<double> prices;
        for (const auto& s : sites) {
            const auto fixes = neutralize(s, g.cell(s).choices.intersect(s1));
            prices.push_back(std::holds_alternative<RemoveNode>(fixes.front())
                                 ? fix_cost(g, fixes.front(), cf)
                                 : 0.0);
        }
        auto emit = [&](const std::vector<std::size_t>& picked) {
            std::vector<Site> chosen;
            for (std::size_t i : picked) chosen.push_back(sites[i]);
            std::vector<Fix> fixes;
            for (const auto& s : descending(chosen)) {
                auto nf = neutralize(s, g.cell(s).choices.intersect(s1));
                fixes.insert(fixes.end(), nf.begin(), nf.end());
            }
            add(std::move(fixes));
        };

        // Which occurrences survive matters to the other constraints even when
        // every drop costs the same, so enumerate the drop-sets instead of
        // hard-coding one pick.
        auto combos = index_subsets(sites.size(), excess, kEnumCap);
        if (combos.size() >= kEnumCap) {
            // too many: single greedy pick, cheapest first, latest breaking ties
            std::vector<std::size_t> order(sites.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (prices[a] != prices[b]) return prices[a] < prices[b];
                return a > b;
            });
            order.resize(excess);
            emit(order);
            return;
        }
        for (const auto& combo : combos) emit(combo);
    }

    void exact_count(std::size_t n) {
        const BranchSet& s1 = c.params[0];
        const auto sites = can_sites(s1);

        auto keeper_fixes = [&](const std::vector<std::size_t>& keep) {
            std::vector<bool> kept(sites.size(), false);
            for (std::size_t i : keep) kept[i] = true;
            std::vector<std::pair<Site, std::vector<Fix>>> parts;
            for (std::size_t i = 0; i < sites.size(); ++i) {
                const Cell& cell = g.cell(sites[i]);
                if (kept[i]) {
                    if (!cell.choices.subset_of(s1))
                        parts.push_back({sites[i],
                                         {SubsetCell{sites[i].node, sites[i].cell,
                                                     cell.choices.intersect(s1)}}});
                } else {
                    parts.push_back({sites[i], neutralize(sites[i], cell.choices.intersect(s1))});
                }
            }
            std::sort(parts.begin(), parts.end(),
                      [&](const auto& a, const auto& b) {
                          return rel.rank.at(a.first) > rel.rank.at(b.first);
                      });
            std::vector<Fix> fixes;
            for (auto& [s, part] : parts) fixes.insert(fixes.end(), part.begin(), part.end());
            return fixes;
        };

        if (sites.size() >= n) {
            auto combos = index_subsets(sites.size(), n, kEnumCap);
            if (combos.size() >= kEnumCap) {
                // greedy: keep guaranteed occurrences first, then earliest candidates
                std::vector<std::size_t> order(sites.size());
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    const bool ma = rel.must_be(sites[a], s1), mb = rel.must_be(sites[b], s1);
                    if (ma != mb) return ma;
                    return a < b;
                });
                order.resize(n);
                add(keeper_fixes(order));
            } else {
                for (const auto& combo : combos) add(keeper_fixes(combo));
            }
        } else {
            std::vector<std::size_t> all(sites.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            add_insertions(n - sites.size(), s1, keeper_fixes(all));
        }
    }

    // ---- boundary templates --------------------------------------------

    void boundary_pin(bool first) {
        const BranchSet& s1 = c.params[0];
        const PinSide side = first ? PinSide::First : PinSide::Last;

        for (const auto& n : topo_nodes()) {
            const auto& chain = g.node(n).chain;
            for (std::size_t k = 0; k < chain.size(); ++k) {
                const Cell& cell = chain[k];
                if (!cell.choices.intersects(s1)) continue;
                std::vector<Fix> fixes;
                // clear everything that would have to come on the wrong side of
                // the pinned cell, including cells of n's own chain
                std::vector<Site> blockers;
                for (const auto& other : topo_nodes()) {
                    if (other == n) continue;
                    const bool blocks = first ? rel.reach.reaches(other, n)
                                              : rel.reach.reaches(n, other);
                    if (!blocks) continue;
                    for (std::size_t ci = 0; ci < g.node(other).chain.size(); ++ci)
                        blockers.push_back({other, ci});
                }
                if (first)
                    for (std::size_t ci = 0; ci < k; ++ci) blockers.push_back({n, ci});
                else
                    for (std::size_t ci = k + 1; ci < chain.size(); ++ci)
                        blockers.push_back({n, ci});
                for (const auto& s : descending(blockers))
                    fixes.push_back(RemoveNode{s.node, s.cell});
                const std::size_t edge_index = first ? 0 : k;
                if (!cell.choices.subset_of(s1))
                    fixes.push_back(SubsetCell{n, edge_index, cell.choices.intersect(s1)});
                fixes.push_back(PinNode{n, side});
                add(std::move(fixes));
            }
        }

        // insert a fresh pinned node; an existing opposite holder must go first
        const auto holder = first ? g.pinned_first_node() : g.pinned_last_node();
        for (const auto& cls : cost_classes(c.params[0], cf)) {
            std::vector<Fix> fixes;
            NodeId next = g.next_id();
            if (holder) {
                const Cell& held = first ? g.node(*holder).chain.front()
                                         : g.node(*holder).chain.back();
                if (!held.choices.intersects(s1)) {
                    for (std::size_t ci = g.node(*holder).chain.size(); ci-- > 0;)
                        fixes.push_back(RemoveNode{*holder, ci});
                } else {
                    continue;  // covered by the pin-existing candidates above
                }
            }
            fixes.push_back(InsertNode{{inserted_cell(cls)}, {}, {}});
            fixes.push_back(PinNode{next, side});
            add(std::move(fixes));
        }
    }

    // ---- choice templates ----------------------------------------------

    void choice() {
        const BranchSet both = c.params[0].unite(c.params[1]);
        for (const auto& cls : cost_classes(both, cf))
            add({InsertNode{{inserted_cell(cls)}, {}, {}}});
        for (const auto& s : rel.sites) {
            const Cell& cell = g.cell(s);
            if (cell.original() || !cell.choices.intersects(both) ||
                cell.choices.subset_of(both))
                continue;
            add({SubsetCell{s.node, s.cell, cell.choices.intersect(both)}});
        }
    }

    void exclusive_choice() {
        for (int side = 0; side < 2; ++side) {
            const BranchSet& keep = c.params[side];
            const BranchSet& drop = c.params[1 - side];

            // choices after forcing the other side out
            std::vector<std::pair<Site, BranchSet>> narrowed;
            for (const auto& s : rel.sites) {
                const Cell& cell = g.cell(s);
                if (cell.choices.intersects(drop))
                    narrowed.push_back({s, cell.choices.subtract(drop)});
            }

            auto emit = [&](std::optional<Site> promote) {
                std::vector<std::pair<Site, std::vector<Fix>>> parts;
                for (const auto& [s, rest] : narrowed) {
                    BranchSet target = rest;
                    if (promote && s == *promote) target = rest.intersect(keep);
                    if (target.empty())
                        parts.push_back({s, {RemoveNode{s.node, s.cell}}});
                    else if (!(target == g.cell(s).choices))
                        parts.push_back({s, {SubsetCell{s.node, s.cell, target}}});
                }
                if (promote) {
                    bool handled = false;
                    for (auto& [s, part] : parts) handled = handled || s == *promote;
                    if (!handled) {
                        const Cell& cell = g.cell(*promote);
                        if (!cell.choices.subset_of(keep))
                            parts.push_back({*promote,
                                             {SubsetCell{promote->node, promote->cell,
                                                         cell.choices.intersect(keep)}}});
                    }
                }
                std::sort(parts.begin(), parts.end(), [&](const auto& a, const auto& b) {
                    return rel.rank.at(a.first) > rel.rank.at(b.first);
                });
                std::vector<Fix> fixes;
                for (auto& [s, part] : parts)
                    fixes.insert(fixes.end(), part.begin(), part.end());
                return fixes;
            };

            // guarantee the kept side via an existing cell...
            bool any_promote = false;
            for (const auto& s : rel.sites) {
                const Cell& cell = g.cell(s);
                if (!cell.choices.subtract(drop).intersects(keep)) continue;
                any_promote = true;
                add(emit(s));
            }
            // ...or by inserting it
            for (const auto& cls : cost_classes(keep.subtract(drop), cf)) {
                auto fixes = emit(std::nullopt);
                fixes.push_back(InsertNode{{inserted_cell(cls)}, {}, {}});
                add(std::move(fixes));
            }
            (void)any_promote;
        }
    }

    // ---- positive relation templates -----------------------------------

    void anywhere_target(const BranchSet& target) {
        const Site q = *act.site;
        add(neutralize(q, act.triggering_members));
        for (const auto& cls : cost_classes(target, cf))
            add({InsertNode{{inserted_cell(cls)}, {}, {}}});
        for (const auto& r : rel.sites) {
            if (r == q) continue;
            const Cell& cell = g.cell(r);
            if (cell.choices.intersects(target) && !cell.choices.subset_of(target))
                add({SubsetCell{r.node, r.cell, cell.choices.intersect(target)}});
        }
    }

    void ordered_target(const BranchSet& target, bool forward) {
        const Site q = *act.site;
        add(neutralize(q, act.triggering_members));

        for (const auto& cls : cost_classes(target, cf)) {
            InsertNode ins{{inserted_cell(cls)}, {}, {}};
            (forward ? ins.preds : ins.succs).push_back(q.node);
            add({std::move(ins)});
        }

        // order an existing guaranteed target onto the right side of q
        for (NodeId x : target_nodes_must(target, q)) {
            if (x == q.node) continue;
            if (forward ? rel.reach.reaches(x, q.node) : rel.reach.reaches(q.node, x)) continue;
            add({forward ? AddArc{q.node, x} : AddArc{x, q.node}});
        }

        // narrow an existing candidate target, ordering it if needed
        for (const auto& r : rel.sites) {
            if (r == q) continue;
            const Cell& cell = g.cell(r);
            if (!cell.choices.intersects(target) || cell.choices.subset_of(target)) continue;
            std::vector<Fix> fixes{SubsetCell{r.node, r.cell, cell.choices.intersect(target)}};
            const bool placed = forward ? rel.always_before(q, r) : rel.always_before(r, q);
            if (!placed) {
                if (r.node == q.node) continue;
                if (forward ? rel.reach.reaches(r.node, q.node)
                            : rel.reach.reaches(q.node, r.node))
                    continue;
                fixes.push_back(forward ? AddArc{q.node, r.node} : AddArc{r.node, q.node});
            }
            add(std::move(fixes));
        }
    }

    void alternate_target(const BranchSet& act_set, const BranchSet& target, bool forward) {
        const Site q = *act.site;
        add(neutralize(q, act.triggering_members));

        // repeats of the activation set that could land between q and a target
        std::vector<Site> dangers;
        for (const auto& p : rel.sites) {
            if (p == q || !rel.can_be(p, act_set)) continue;
            if (forward ? rel.possibly_after(q, p) : rel.possibly_after(p, q))
                dangers.push_back(p);
        }
        std::vector<Site> same_node, cross;
        for (const auto& p : dangers)
            (p.node == q.node ? same_node : cross).push_back(p);

        for (const auto& cls : cost_classes(target, cf)) {
            // free-floating target fenced off from the repeats by arcs
            {
                std::vector<Fix> fixes;
                for (const auto& p : descending(same_node)) {
                    auto nf = neutralize(p, g.cell(p).choices.intersect(act_set));
                    fixes.insert(fixes.end(), nf.begin(), nf.end());
                }
                InsertNode ins{{inserted_cell(cls)}, {}, {}};
                (forward ? ins.preds : ins.succs).push_back(q.node);
                for (const auto& p : cross) {
                    auto& far = forward ? ins.succs : ins.preds;
                    if (std::find(far.begin(), far.end(), p.node) == far.end())
                        far.push_back(p.node);
                }
                fixes.push_back(std::move(ins));
                add(std::move(fixes));
            }
            // chain-adjacent placement: nothing can intervene
            add(adjacent_insertion(q, cls, forward));
        }

        // reuse an existing guaranteed target, handling each repeat per choice
        for (const auto& r : rel.sites) {
            if (r == q || !rel.must_be(r, target)) continue;
            const NodeId x = r.node;
            std::vector<Fix> base;
            const bool placed = forward ? rel.always_before(q, r) : rel.always_before(r, q);
            if (!placed) {
                if (x == q.node) continue;
                if (forward ? rel.reach.reaches(x, q.node) : rel.reach.reaches(q.node, x))
                    continue;
                base.push_back(forward ? AddArc{q.node, x} : AddArc{x, q.node});
            }
            std::vector<std::vector<std::vector<Fix>>> slots;
            std::size_t involved = 0;
            for (const auto& p : dangers) {
                // the target itself sits at the boundary, never strictly between
                if (p == r) continue;
                const bool beyond = forward ? rel.always_before(r, p) : rel.always_before(p, r);
                if (beyond) continue;
                ++involved;
                std::vector<std::vector<Fix>> options;
                options.push_back(neutralize(p, g.cell(p).choices.intersect(act_set)));
                if (p.node != x && p.node != q.node &&
                    !(forward ? rel.reach.reaches(p.node, x) : rel.reach.reaches(x, p.node)))
                    options.push_back({forward ? Fix{AddArc{x, p.node}}
                                               : Fix{AddArc{p.node, x}}});
                // the repeat may equally sit on the far side of the activation
                if (p.node != x && p.node != q.node &&
                    !(forward ? rel.reach.reaches(q.node, p.node)
                              : rel.reach.reaches(p.node, q.node)))
                    options.push_back({forward ? Fix{AddArc{p.node, q.node}}
                                               : Fix{AddArc{q.node, p.node}}});
                slots.push_back(std::move(options));
            }
            if (involved > kMaxDangers) {
                std::vector<Fix> fixes = base;
                for (const auto& p : descending(dangers)) {
                    auto nf = neutralize(p, g.cell(p).choices.intersect(act_set));
                    fixes.insert(fixes.end(), nf.begin(), nf.end());
                }
                add(std::move(fixes));
            } else {
                for (auto& combo : fix_products(slots, kEnumCap)) {
                    auto fixes = base;
                    fixes.insert(fixes.end(), combo.begin(), combo.end());
                    add(std::move(fixes));
                }
            }
        }

        // promote an existing candidate target, neutralizing every repeat
        for (const auto& r : rel.sites) {
            if (r == q) continue;
            const Cell& cell = g.cell(r);
            if (!cell.choices.intersects(target) || cell.choices.subset_of(target)) continue;
            std::vector<Fix> arcs;
            const bool placed = forward ? rel.always_before(q, r) : rel.always_before(r, q);
            if (!placed) {
                if (r.node == q.node) continue;
                if (forward ? rel.reach.reaches(r.node, q.node)
                            : rel.reach.reaches(q.node, r.node))
                    continue;
                arcs.push_back(forward ? AddArc{q.node, r.node} : AddArc{r.node, q.node});
            }
            std::vector<std::pair<Site, std::vector<Fix>>> parts;
            parts.push_back({r, {SubsetCell{r.node, r.cell, cell.choices.intersect(target)}}});
            for (const auto& p : dangers) {
                if (p == r) continue;
                const bool beyond = forward ? rel.always_before(r, p) : rel.always_before(p, r);
                if (!beyond) parts.push_back({p, neutralize(p, g.cell(p).choices.intersect(act_set))});
            }
            std::sort(parts.begin(), parts.end(), [&](const auto& a, const auto& b) {
                return rel.rank.at(a.first) > rel.rank.at(b.first);
            });
            std::vector<Fix> fixes;
            for (auto& [s, part] : parts) fixes.insert(fixes.end(), part.begin(), part.end());
            fixes.insert(fixes.end(), arcs.begin(), arcs.end());
            add(std::move(fixes));
        }
    }

    void chain_target(const BranchSet& target, bool forward) {
        const Site q = *act.site;
        add(neutralize(q, act.triggering_members));

        const auto step = forward ? rel.chain_next(q) : rel.chain_prev(q);
        if (step && rel.can_be(*step, target)) {
            const Cell& cell = g.cell(*step);
            if (!cell.choices.subset_of(target))
                add({SubsetCell{step->node, step->cell, cell.choices.intersect(target)}});
        }

        for (const auto& cls : cost_classes(target, cf))
            add(adjacent_insertion(q, cls, forward));

        // absorb an existing node so one of its cells becomes chain-adjacent;
        // nodes forced strictly between would make the merge cyclic, so the
        // candidate removes them first.  An inner cell may serve as the new
        // boundary once the same-chain cells on its wrong side are dropped or
        // sheared off into their own node.
        for (const auto& n : topo_nodes()) {
            if (n == q.node) continue;
            if (forward ? rel.reach.reaches(n, q.node) : rel.reach.reaches(q.node, n)) continue;
            const auto& chain = g.node(n).chain;
            const bool usable = std::any_of(chain.begin(), chain.end(), [&](const Cell& x) {
                return x.choices.intersects(target);
            });
            if (!usable) continue;
            std::vector<Fix> shared;
            for (const auto& x : topo_nodes()) {
                if (x == n || x == q.node) continue;
                const bool mid = forward
                                     ? rel.reach.reaches(q.node, x) && rel.reach.reaches(x, n)
                                     : rel.reach.reaches(n, x) && rel.reach.reaches(x, q.node);
                if (!mid) continue;
                for (std::size_t cell = g.node(x).chain.size(); cell-- > 0;)
                    shared.push_back(RemoveNode{x, cell});
            }
            NodeId qnode = q.node;
            bool qsplit = false;
            if (forward && step) {
                shared.push_back(SplitChain{q.node, q.cell + 1});
                qsplit = true;
            } else if (!forward && step) {
                shared.push_back(SplitChain{q.node, q.cell});
                qnode = g.next_id();  // q moved into the split-off tail
                qsplit = true;
            }
            for (std::size_t k = 0; k < chain.size(); ++k) {
                const Cell& cell = chain[k];
                if (!cell.choices.intersects(target)) continue;
                const std::size_t wrong = forward ? k : chain.size() - 1 - k;
                {
                    std::vector<Fix> fixes = shared;
                    if (forward)
                        for (std::size_t ci = k; ci-- > 0;) fixes.push_back(RemoveNode{n, ci});
                    else
                        for (std::size_t ci = chain.size(); ci-- > k + 1;)
                            fixes.push_back(RemoveNode{n, ci});
                    if (!cell.choices.subset_of(target))
                        fixes.push_back(
                            SubsetCell{n, forward ? 0 : k, cell.choices.intersect(target)});
                    fixes.push_back(forward ? MergeChains{qnode, n} : MergeChains{n, qnode});
                    add(std::move(fixes));
                }
                if (wrong > 0) {
                    std::vector<Fix> fixes = shared;
                    NodeId part = n;
                    if (forward) {
                        fixes.push_back(SplitChain{n, k});
                        part = g.next_id() + (qsplit ? 1 : 0);
                    } else {
                        fixes.push_back(SplitChain{n, k + 1});
                    }
                    if (!cell.choices.subset_of(target))
                        fixes.push_back(
                            SubsetCell{part, forward ? 0 : k, cell.choices.intersect(target)});
                    fixes.push_back(forward ? MergeChains{qnode, part} : MergeChains{part, qnode});
                    add(std::move(fixes));
                }
            }
        }
    }

    // insert a cell into the chain immediately next to q
    std::vector<Fix> adjacent_insertion(const Site& q, const BranchSet& cls,
                                        bool forward) const {
        std::vector<Fix> fixes;
        NodeId next = g.next_id();
        NodeId qnode = q.node;
        const auto& chain = g.node(q.node).chain;
        if (forward && q.cell + 1 < chain.size()) {
            fixes.push_back(SplitChain{q.node, q.cell + 1});
            ++next;
        } else if (!forward && q.cell > 0) {
            fixes.push_back(SplitChain{q.node, q.cell});
            qnode = next;
            ++next;
        }
        InsertNode ins{{inserted_cell(cls)}, {}, {}};
        (forward ? ins.preds : ins.succs).push_back(qnode);
        fixes.push_back(std::move(ins));
        fixes.push_back(forward ? MergeChains{qnode, next} : MergeChains{next, qnode});
        return fixes;
    }

    // ---- negative templates --------------------------------------------

    void side_removals() {
        for (int side = 0; side < 2; ++side) {
            const BranchSet& set = c.params[side];
            std::vector<Fix> fixes;
            for (const auto& s : descending(can_sites(set))) {
                auto nf = neutralize(s, g.cell(s).choices.intersect(set));
                fixes.insert(fixes.end(), nf.begin(), nf.end());
            }
            add(std::move(fixes));
        }
    }

    void forbid_target(const BranchSet& target, bool forward) {
        const Site q = *act.site;
        add(neutralize(q, act.triggering_members));
        add({PinNode{q.node, forward ? PinSide::Last : PinSide::First}});

        std::vector<Site> dangers;
        for (const auto& r : rel.sites) {
            if (r == q || !rel.can_be(r, target)) continue;
            if (forward ? rel.possibly_after(q, r) : rel.possibly_after(r, q))
                dangers.push_back(r);
        }
        std::vector<std::vector<std::vector<Fix>>> slots;
        for (const auto& r : dangers) {
            std::vector<std::vector<Fix>> options;
            options.push_back(neutralize(r, g.cell(r).choices.intersect(target)));
            if (r.node != q.node &&
                !(forward ? rel.reach.reaches(q.node, r.node)
                          : rel.reach.reaches(r.node, q.node)))
                options.push_back({forward ? Fix{AddArc{r.node, q.node}}
                                           : Fix{AddArc{q.node, r.node}}});
            slots.push_back(std::move(options));
        }
        if (dangers.size() > kMaxDangers) {
            std::vector<Fix> fixes;
            for (const auto& r : descending(dangers)) {
                auto nf = neutralize(r, g.cell(r).choices.intersect(target));
                fixes.insert(fixes.end(), nf.begin(), nf.end());
            }
            add(std::move(fixes));
        } else {
            for (auto& combo : fix_products(slots, kEnumCap)) add(std::move(combo));
        }
    }

    void forbid_chain_target(const BranchSet& target, bool forward) {
        const Site q = *act.site;
        add(neutralize(q, act.triggering_members));

        const auto step = forward ? rel.chain_next(q) : rel.chain_prev(q);
        if (step && rel.can_be(*step, target)) {
            const Cell& cell = g.cell(*step);
            const BranchSet rest = cell.choices.subtract(target);
            if (!rest.empty())
                add({SubsetCell{step->node, step->cell, rest}});
            else
                add(clearing_run(q, target, forward));
            // detach the tail and keep it at distance with a buffer
            for (const auto& cls : cost_classes(universe.subtract(target), cf)) {
                std::vector<Fix> fixes;
                if (forward) {
                    fixes.push_back(SplitChain{q.node, q.cell + 1});
                    NodeId buffer = g.next_id() + 1;
                    InsertNode ins{{inserted_cell(cls)}, {q.node}, {}};
                    fixes.push_back(std::move(ins));
                    fixes.push_back(MergeChains{q.node, buffer});
                } else {
                    fixes.push_back(SplitChain{q.node, q.cell});
                    NodeId qnode = g.next_id();
                    NodeId buffer = qnode + 1;
                    InsertNode ins{{inserted_cell(cls)}, {}, {qnode}};
                    fixes.push_back(std::move(ins));
                    fixes.push_back(MergeChains{buffer, qnode});
                }
                add(std::move(fixes));
            }
            return;
        }

        // boundary cell: fence off every node that could become adjacent
        add({PinNode{q.node, forward ? PinSide::Last : PinSide::First}});
        for (const auto& cls : cost_classes(universe.subtract(target), cf))
            add(adjacent_insertion(q, cls, forward));
        // absorb a safe neighbour so the adjacent slot is permanently taken
        for (const auto& n : topo_nodes()) {
            if (n == q.node) continue;
            if (forward ? rel.reach.reaches(n, q.node) : rel.reach.reaches(q.node, n)) continue;
            const Cell& edge = forward ? g.node(n).chain.front() : g.node(n).chain.back();
            const BranchSet rest = edge.choices.subtract(target);
            if (rest.empty()) continue;
            std::vector<Fix> fixes;
            if (edge.choices.intersects(target)) {
                const std::size_t edge_index = forward ? 0 : g.node(n).chain.size() - 1;
                fixes.push_back(SubsetCell{n, edge_index, rest});
            }
            fixes.push_back(forward ? MergeChains{q.node, n} : MergeChains{n, q.node});
            add(std::move(fixes));
        }

        std::vector<NodeId> threats;
        for (NodeId z : forward ? rel.possibly_adjacent_after(q.node)
                                : rel.possibly_adjacent_before(q.node)) {
            const Cell& edge = forward ? g.node(z).chain.front() : g.node(z).chain.back();
            if (edge.choices.intersects(target)) threats.push_back(z);
        }
        std::vector<std::vector<std::vector<Fix>>> slots;
        for (NodeId z : threats) {
            std::vector<std::vector<Fix>> options;
            const std::size_t edge_index = forward ? 0 : g.node(z).chain.size() - 1;
            options.push_back(neutralize({z, edge_index},
                                         (forward ? g.node(z).chain.front()
                                                  : g.node(z).chain.back())
                                             .choices.intersect(target)));
            if (!(forward ? rel.reach.reaches(q.node, z) : rel.reach.reaches(z, q.node)))
                options.push_back({forward ? Fix{AddArc{z, q.node}} : Fix{AddArc{q.node, z}}});
            slots.push_back(std::move(options));
        }
        if (threats.size() > kMaxDangers) {
            std::vector<std::pair<Site, std::vector<Fix>>> parts;
            for (NodeId z : threats) {
                const std::size_t edge_index = forward ? 0 : g.node(z).chain.size() - 1;
                const Site s{z, edge_index};
                parts.push_back({s, neutralize(s, g.cell(s).choices.intersect(target))});
            }
            std::sort(parts.begin(), parts.end(), [&](const auto& a, const auto& b) {
                return rel.rank.at(a.first) > rel.rank.at(b.first);
            });
            std::vector<Fix> fixes;
            for (auto& [s, part] : parts) fixes.insert(fixes.end(), part.begin(), part.end());
            add(std::move(fixes));
        } else if (!threats.empty()) {
            for (auto& combo : fix_products(slots, kEnumCap)) add(std::move(combo));
        }
        if (!threats.empty()) add(clearing_run(q, target, forward));
    }

    // Neutralize whichever cell could sit right next to q, re-checking against
    // the evolving graph, until no target can take the adjacent slot. Handles
    // runs of forced targets that single-cell removals would merely shift.
    std::vector<Fix> clearing_run(Site q, const BranchSet& target, bool forward) const {
        std::vector<Fix> fixes;
        LTGraph cur = g;
        for (int guard = 0; guard < 32; ++guard) {
            std::optional<Fix> next;
            {
                const SiteRelations r2(cur);
                if (auto s = forward ? r2.chain_next(q) : r2.chain_prev(q)) {
                    if (r2.can_be(*s, target)) {
                        const BranchSet rest = cur.cell(*s).choices.subtract(target);
                        next = rest.empty() ? Fix{RemoveNode{s->node, s->cell}}
                                            : Fix{SubsetCell{s->node, s->cell, rest}};
                    }
                } else {
                    for (NodeId z : forward ? r2.possibly_adjacent_after(q.node)
                                            : r2.possibly_adjacent_before(q.node)) {
                        const auto& chain = cur.node(z).chain;
                        const std::size_t edge_index = forward ? 0 : chain.size() - 1;
                        const BranchSet& choices = chain[edge_index].choices;
                        if (!choices.intersects(target)) continue;
                        const BranchSet rest = choices.subtract(target);
                        next = rest.empty() ? Fix{RemoveNode{z, edge_index}}
                                            : Fix{SubsetCell{z, edge_index, rest}};
                        break;
                    }
                }
            }
            if (!next) break;
            if (const auto* rm = std::get_if<RemoveNode>(&*next))
                if (rm->node == q.node && rm->cell < q.cell) --q.cell;
            fixes.push_back(*next);
            cur = cur.apply(*next);
        }
        return fixes;
    }

    // ---- shared helpers ------------------------------------------------

    std::vector<NodeId> topo_nodes() const {
        std::vector<NodeId> out;
        for (const auto& s : rel.sites)
            if (out.empty() || out.back() != s.node) out.push_back(s.node);
        return out;
    }

    // nodes containing a guaranteed target cell other than q's own cell
    std::vector<NodeId> target_nodes_must(const BranchSet& target, const Site& q) const {
        std::vector<NodeId> out;
        for (const auto& r : rel.sites) {
            if (r == q || !rel.must_be(r, target)) continue;
            if (std::find(out.begin(), out.end(), r.node) == out.end()) out.push_back(r.node);
        }
        return out;
    }
};

}  // namespace detail

// All repair actions for one activation: each returned action leaves the graph
// acyclic and removes the activation it was proposed for. `universe` is the set
// of activities insertable as neutral buffers (normally the model alphabet).
inline std::vector<Action> propose_actions(const LTGraph& g, const Constraint& c,
                                           const GraphActivation& act, const CostFunction& cf,
                                           const BranchSet& universe) {
    detail::Proposer proposer(g, c, act, cf, universe);
    proposer.run();
    std::vector<Action> out;
    for (auto& fixes : proposer.candidates) {
        auto action = detail::finish_action(g, c, act, fixes, cf);
        if (!action) continue;
        bool duplicate = false;
        for (const auto& have : out)
            if (have.fixes == action->fixes) {
                duplicate = true;
                break;
            }
        if (!duplicate) out.push_back(std::move(*action));
    }
    return out;
}

inline std::vector<Action> propose_actions(const LTGraph& g, const Constraint& c,
                                           const GraphActivation& act, const CostFunction& cf) {
    BranchSet universe;
    for (const auto& p : c.params) universe = universe.unite(p);
    return propose_actions(g, c, act, cf, universe);
}

inline ProposalMap propose_all(const LTGraph& g, const Model& m,
                               const std::vector<GraphActivation>& violated,
                               const CostFunction& cf) {
    std::vector<Activity> alphabet(m.alphabet().begin(), m.alphabet().end());
    const BranchSet universe{alphabet};
    ProposalMap out;
    for (const auto& act : violated)
        out[act] = propose_actions(g, m.constraints()[act.constraint_index], act, cf, universe);
    return out;
}

namespace detail {

inline double average_cost(const std::vector<Action>& actions) {
    if (actions.empty()) return std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (const auto& a : actions) total += a.cost;
    return total / static_cast<double>(actions.size());
}

// true = pick the latest site among ties, false = the earliest
inline bool prefers_late(TemplateKind kind, bool second_side) {
    const TemplateTraits& t = traits(kind);
    DirectionClass dir = t.direction;
    if (dir == DirectionClass::Bidirectional)
        dir = second_side ? DirectionClass::Backward : DirectionClass::Forward;
    if (dir == DirectionClass::Forward) return t.polarity == Polarity::Positive;
    if (dir == DirectionClass::Backward) return t.polarity == Polarity::Negative;
    return false;
}

}  // namespace detail

// Activations ordered by urgency: most expensive average repair first, dead
// ends (no actions at all) before everything. Ties fall back to declaration
// order and then to the end of the trace for forward-positive templates and
// symmetrically for the other direction classes.
inline std::vector<GraphActivation> activation_order(
    const std::vector<GraphActivation>& violated, const ProposalMap& proposals,
    const Model& m) {
    std::vector<GraphActivation> out = violated;
    auto key = [&](const GraphActivation& a) {
        const auto it = proposals.find(a);
        const double avg = it == proposals.end()
                               ? std::numeric_limits<double>::infinity()
                               : detail::average_cost(it->second);
        const TemplateKind kind = m.constraints()[a.constraint_index].kind;
        const std::size_t rank = detail::prefers_late(kind, a.second_side)
                                     ? SIZE_MAX - a.site_rank
                                     : a.site_rank;
        return std::tuple<double, std::size_t, bool, std::size_t>(-avg, a.constraint_index,
                                                                  a.second_side, rank);
    };
    std::stable_sort(out.begin(), out.end(),
                     [&](const GraphActivation& a, const GraphActivation& b) {
                         return key(a) < key(b);
                     });
    return out;
}

inline std::optional<GraphActivation> select_activation(
    const std::vector<GraphActivation>& violated, const ProposalMap& proposals,
    const Model& m) {
    if (violated.empty()) return std::nullopt;
    return activation_order(violated, proposals, m).front();
}

}  // namespace declarealign
