#pragma once

#include <vector>

#include "ltgraph.hpp"
#include "model.hpp"

namespace declarealign {

// A constraint activation on the graph. A site activation means the cell can
// resolve to a triggering member and the template's condition can then fail in
// at least one linearization; a whole-graph activation means the trace-level
// condition is not guaranteed by every linearization.
struct GraphActivation {
    std::size_t constraint_index = 0;
    std::optional<Site> site;     // nullopt = whole-graph condition
    bool second_side = false;     // which parameter activated (bidirectional kinds)
    BranchSet triggering_members; // empty for whole-graph activations
    std::size_t site_rank = SIZE_MAX;  // position in the deterministic site order

    auto operator<=>(const GraphActivation&) const = default;
};

namespace detail {

// Precomputed order relations over cells of an acyclic graph. Chains are
// contiguous, so cross-node relations depend only on node reachability.
struct SiteRelations {
    const LTGraph& g;
    LTGraph::Reachability reach;
    std::vector<Site> sites;                 // deterministic site order
    std::map<Site, std::size_t> rank;

    explicit SiteRelations(const LTGraph& graph) : g(graph), reach(graph.reachability()) {
        sites = g.topological_sites();
        for (std::size_t i = 0; i < sites.size(); ++i) rank[sites[i]] = i;
    }

    bool always_before(const Site& a, const Site& b) const {
        if (a.node == b.node) return a.cell < b.cell;
        return reach.reaches(a.node, b.node);
    }

    // b strictly after a in at least one linearization
    bool possibly_after(const Site& a, const Site& b) const {
        return !(a == b) && !always_before(b, a);
    }

    // p strictly between q and r in at least one linearization (q before r)
    bool possibly_between(const Site& q, const Site& p, const Site& r) const {
        if (p == q || p == r) return false;
        if (q.node == r.node)
            return p.node == q.node && q.cell < p.cell && p.cell < r.cell;
        const bool p_leq_q = (p.node == q.node) ? p.cell <= q.cell : reach.reaches(p.node, q.node);
        const bool r_leq_p = (p.node == r.node) ? r.cell <= p.cell : reach.reaches(r.node, p.node);
        return !p_leq_q && !r_leq_p;
    }

    std::optional<Site> chain_next(const Site& s) const {
        const LTNode& n = g.node(s.node);
        if (s.cell + 1 < n.chain.size()) return Site{s.node, s.cell + 1};
        return std::nullopt;
    }

    std::optional<Site> chain_prev(const Site& s) const {
        if (s.cell > 0) return Site{s.node, s.cell - 1};
        return std::nullopt;
    }

    // nodes whose first cell can directly follow the last cell of x
    std::vector<NodeId> possibly_adjacent_after(NodeId x) const {
        std::vector<NodeId> out;
        for (const auto& z : g.nodes()) {
            if (z.id == x || reach.reaches(z.id, x)) continue;
            bool forced_between = false;
            for (const auto& w : g.nodes()) {
                if (w.id == x || w.id == z.id) continue;
                if (reach.reaches(x, w.id) && reach.reaches(w.id, z.id)) {
                    forced_between = true;
                    break;
                }
            }
            if (!forced_between) out.push_back(z.id);
        }
        return out;
    }

    std::vector<NodeId> possibly_adjacent_before(NodeId x) const {
        std::vector<NodeId> out;
        for (const auto& z : g.nodes()) {
            if (z.id == x || reach.reaches(x, z.id)) continue;
            bool forced_between = false;
            for (const auto& w : g.nodes()) {
                if (w.id == x || w.id == z.id) continue;
                if (reach.reaches(z.id, w.id) && reach.reaches(w.id, x)) {
                    forced_between = true;
                    break;
                }
            }
            if (!forced_between) out.push_back(z.id);
        }
        return out;
    }

    bool can_be(const Site& s, const BranchSet& set) const {
        return g.cell(s).choices.intersects(set);
    }

    bool must_be(const Site& s, const BranchSet& set) const {
        return g.cell(s).choices.subset_of(set);
    }
};

}  // namespace detail

// All activations of constraint c that can fail in some linearization/branch
// resolution of g. Empty for every constraint = the state is a goal. The rules
// are conservative where certification must survive later insertions: chain
// templates accept only chain adjacency inside one node, Init/End only pinned
// nodes, and ordering between unordered nodes is never assumed.
inline std::vector<GraphActivation> violated_activations(const LTGraph& g, const Constraint& c,
                                                         std::size_t constraint_index = 0) {
    using K = TemplateKind;
    std::vector<GraphActivation> out;
    const detail::SiteRelations rel(g);
    const BranchSet& s1 = c.params[0];
    const BranchSet* s2 = c.params.size() > 1 ? &c.params[1] : nullptr;

    auto whole_graph_violation = [&]() {
        out.push_back({constraint_index, std::nullopt, false, BranchSet{}, SIZE_MAX});
    };

    auto add_site = [&](const Site& q, bool second_side, BranchSet triggering) {
        out.push_back({constraint_index, q, second_side, std::move(triggering), rel.rank.at(q)});
    };

    auto count_must = [&](const BranchSet& set) {
        std::size_t n = 0;
        for (const auto& s : rel.sites)
            if (rel.must_be(s, set)) ++n;
        return n;
    };
    auto count_can = [&](const BranchSet& set) {
        std::size_t n = 0;
        for (const auto& s : rel.sites)
            if (rel.can_be(s, set)) ++n;
        return n;
    };

    // response-style guarantee: a cell after q that must resolve into `set`
    auto guaranteed_after = [&](const Site& q, const BranchSet& set) {
        for (const auto& r : rel.sites)
            if (!(r == q) && rel.must_be(r, set) && rel.always_before(q, r)) return true;
        return false;
    };
    auto guaranteed_before = [&](const Site& q, const BranchSet& set) {
        for (const auto& r : rel.sites)
            if (!(r == q) && rel.must_be(r, set) && rel.always_before(r, q)) return true;
        return false;
    };

    // alternate-style guarantee: a guaranteed target with no possible repeat of
    // the activation set strictly between
    auto alternate_after = [&](const Site& q, const BranchSet& act, const BranchSet& tgt) {
        for (const auto& r : rel.sites) {
            if (r == q || !rel.must_be(r, tgt) || !rel.always_before(q, r)) continue;
            bool clean = true;
            for (const auto& p : rel.sites) {
                if (p == q || p == r || !rel.can_be(p, act)) continue;
                if (rel.possibly_between(q, p, r)) {
                    clean = false;
                    break;
                }
            }
            if (clean) return true;
        }
        return false;
    };
    auto alternate_before = [&](const Site& q, const BranchSet& act, const BranchSet& tgt) {
        for (const auto& r : rel.sites) {
            if (r == q || !rel.must_be(r, tgt) || !rel.always_before(r, q)) continue;
            bool clean = true;
            for (const auto& p : rel.sites) {
                if (p == q || p == r || !rel.can_be(p, act)) continue;
                if (rel.possibly_between(r, p, q)) {
                    clean = false;
                    break;
                }
            }
            if (clean) return true;
        }
        return false;
    };

    auto some_target_possibly_after = [&](const Site& q, const BranchSet& set) {
        for (const auto& r : rel.sites)
            if (!(r == q) && rel.can_be(r, set) && rel.possibly_after(q, r)) return true;
        return false;
    };
    auto some_target_possibly_before = [&](const Site& q, const BranchSet& set) {
        for (const auto& r : rel.sites)
            if (!(r == q) && rel.can_be(r, set) && rel.possibly_after(r, q)) return true;
        return false;
    };

    auto chain_next_must = [&](const Site& q, const BranchSet& set) {
        auto nxt = rel.chain_next(q);
        return nxt && rel.must_be(*nxt, set);
    };
    auto chain_prev_must = [&](const Site& q, const BranchSet& set) {
        auto prv = rel.chain_prev(q);
        return prv && rel.must_be(*prv, set);
    };

    // a cell resolving into `set` can end up immediately after q
    auto chain_threat_after = [&](const Site& q, const BranchSet& set) {
        if (auto nxt = rel.chain_next(q)) return rel.can_be(*nxt, set);
        for (NodeId z : rel.possibly_adjacent_after(q.node))
            if (g.node(z).chain.front().choices.intersects(set)) return true;
        return false;
    };
    auto chain_threat_before = [&](const Site& q, const BranchSet& set) {
        if (auto prv = rel.chain_prev(q)) return rel.can_be(*prv, set);
        for (NodeId z : rel.possibly_adjacent_before(q.node))
            if (g.node(z).chain.back().choices.intersects(set)) return true;
        return false;
    };

    switch (c.kind) {
        case K::Existence:
            if (count_must(s1) < static_cast<std::size_t>(c.n)) whole_graph_violation();
            break;
        case K::Participation:
            if (count_must(s1) < 1) whole_graph_violation();
            break;
        case K::Absence:
            if (count_can(s1) + 1 > static_cast<std::size_t>(c.n)) whole_graph_violation();
            break;
        case K::AtMostOne:
            if (count_can(s1) > 1) whole_graph_violation();
            break;
        case K::Exactly:
            if (count_must(s1) != static_cast<std::size_t>(c.n) ||
                count_can(s1) != static_cast<std::size_t>(c.n))
                whole_graph_violation();
            break;
        case K::Init: {
            auto first = g.pinned_first_node();
            if (!first || !g.node(*first).chain.front().choices.subset_of(s1))
                whole_graph_violation();
            break;
        }
        case K::End: {
            auto last = g.pinned_last_node();
            if (!last || !g.node(*last).chain.back().choices.subset_of(s1))
                whole_graph_violation();
            break;
        }
        case K::Choice: {
            const BranchSet both = s1.unite(*s2);
            bool guaranteed = false;
            for (const auto& s : rel.sites)
                if (rel.must_be(s, both)) {
                    guaranteed = true;
                    break;
                }
            if (!guaranteed) whole_graph_violation();
            break;
        }
        case K::ExclusiveChoice: {
            const BranchSet both = s1.unite(*s2);
            const BranchSet shared = s1.intersect(*s2);
            bool guaranteed = false;
            std::size_t with1 = 0, with2 = 0;
            bool overlap_cell = false, distinct_pair = false;
            std::optional<Site> only1, only2;
            for (const auto& s : rel.sites) {
                if (rel.must_be(s, both)) guaranteed = true;
                const bool c1 = rel.can_be(s, s1), c2 = rel.can_be(s, *s2);
                if (c1) {
                    ++with1;
                    only1 = s;
                }
                if (c2) {
                    ++with2;
                    only2 = s;
                }
                if (!shared.empty() && rel.can_be(s, shared)) overlap_cell = true;
            }
            if (with1 > 0 && with2 > 0 && !(with1 == 1 && with2 == 1 && only1 == only2))
                distinct_pair = true;
            const bool both_possible = overlap_cell || distinct_pair;
            if (!guaranteed || both_possible) whole_graph_violation();
            break;
        }

        default:
            for (const auto& q : rel.sites) {
                const BranchSet& choices = g.cell(q).choices;
                const BranchSet tm1 = choices.intersect(s1);
                const BranchSet tm2 = s2 ? choices.intersect(*s2) : BranchSet{};
                switch (c.kind) {
                    case K::RespondedExistence: {
                        if (tm1.empty()) break;
                        const BranchSet bad = tm1.subtract(*s2);
                        if (bad.empty()) break;
                        bool ok = false;
                        for (const auto& r : rel.sites)
                            if (!(r == q) && rel.must_be(r, *s2)) {
                                ok = true;
                                break;
                            }
                        if (!ok) add_site(q, false, bad);
                        break;
                    }
                    case K::CoExistence: {
                        if (!tm1.empty()) {
                            const BranchSet bad = tm1.subtract(*s2);
                            if (!bad.empty()) {
                                bool ok = false;
                                for (const auto& r : rel.sites)
                                    if (!(r == q) && rel.must_be(r, *s2)) {
                                        ok = true;
                                        break;
                                    }
                                if (!ok) add_site(q, false, bad);
                            }
                        }
                        if (!tm2.empty()) {
                            const BranchSet bad = tm2.subtract(s1);
                            if (!bad.empty()) {
                                bool ok = false;
                                for (const auto& r : rel.sites)
                                    if (!(r == q) && rel.must_be(r, s1)) {
                                        ok = true;
                                        break;
                                    }
                                if (!ok) add_site(q, true, bad);
                            }
                        }
                        break;
                    }
                    case K::Response:
                        if (!tm1.empty() && !guaranteed_after(q, *s2)) add_site(q, false, tm1);
                        break;
                    case K::Precedence:
                        if (!tm2.empty() && !guaranteed_before(q, s1)) add_site(q, true, tm2);
                        break;
                    case K::Succession:
                        if (!tm1.empty() && !guaranteed_after(q, *s2)) add_site(q, false, tm1);
                        if (!tm2.empty() && !guaranteed_before(q, s1)) add_site(q, true, tm2);
                        break;
                    case K::AlternateResponse:
                        if (!tm1.empty() && !alternate_after(q, s1, *s2)) add_site(q, false, tm1);
                        break;
                    case K::AlternatePrecedence:
                        if (!tm2.empty() && !alternate_before(q, *s2, s1)) add_site(q, true, tm2);
                        break;
                    case K::AlternateSuccession:
                        if (!tm1.empty() && !alternate_after(q, s1, *s2)) add_site(q, false, tm1);
                        if (!tm2.empty() && !alternate_before(q, *s2, s1)) add_site(q, true, tm2);
                        break;
                    case K::ChainResponse:
                        if (!tm1.empty() && !chain_next_must(q, *s2)) add_site(q, false, tm1);
                        break;
                    case K::ChainPrecedence:
                        if (!tm2.empty() && !chain_prev_must(q, s1)) add_site(q, true, tm2);
                        break;
                    case K::ChainSuccession:
                        if (!tm1.empty() && !chain_next_must(q, *s2)) add_site(q, false, tm1);
                        if (!tm2.empty() && !chain_prev_must(q, s1)) add_site(q, true, tm2);
                        break;
                    case K::NotRespondedExistence: {
                        if (tm1.empty()) break;
                        bool external = false;
                        for (const auto& r : rel.sites)
                            if (!(r == q) && rel.can_be(r, *s2)) {
                                external = true;
                                break;
                            }
                        const BranchSet self_bad = tm1.intersect(*s2);
                        if (external)
                            add_site(q, false, tm1);
                        else if (!self_bad.empty())
                            add_site(q, false, self_bad);
                        break;
                    }
                    case K::NotCoExistence: {
                        if (!tm1.empty()) {
                            bool external = false;
                            for (const auto& r : rel.sites)
                                if (!(r == q) && rel.can_be(r, *s2)) {
                                    external = true;
                                    break;
                                }
                            const BranchSet self_bad = tm1.intersect(*s2);
                            if (external)
                                add_site(q, false, tm1);
                            else if (!self_bad.empty())
                                add_site(q, false, self_bad);
                        }
                        if (!tm2.empty()) {
                            bool external = false;
                            for (const auto& r : rel.sites)
                                if (!(r == q) && rel.can_be(r, s1)) {
                                    external = true;
                                    break;
                                }
                            const BranchSet self_bad = tm2.intersect(s1);
                            if (external)
                                add_site(q, true, tm2);
                            else if (!self_bad.empty())
                                add_site(q, true, self_bad);
                        }
                        break;
                    }
                    case K::NotResponse:
                        if (!tm1.empty() && some_target_possibly_after(q, *s2))
                            add_site(q, false, tm1);
                        break;
                    case K::NotPrecedence:
                        if (!tm2.empty() && some_target_possibly_before(q, s1))
                            add_site(q, true, tm2);
                        break;
                    case K::NotSuccession:
                        if (!tm1.empty() && some_target_possibly_after(q, *s2))
                            add_site(q, false, tm1);
                        if (!tm2.empty() && some_target_possibly_before(q, s1))
                            add_site(q, true, tm2);
                        break;
                    case K::NotChainResponse:
                        if (!tm1.empty() && chain_threat_after(q, *s2)) add_site(q, false, tm1);
                        break;
                    case K::NotChainPrecedence:
                        if (!tm2.empty() && chain_threat_before(q, s1)) add_site(q, true, tm2);
                        break;
                    case K::NotChainSuccession:
                        if (!tm1.empty() && chain_threat_after(q, *s2)) add_site(q, false, tm1);
                        if (!tm2.empty() && chain_threat_before(q, s1)) add_site(q, true, tm2);
                        break;
                    default:
                        throw std::logic_error("unhandled template kind");
                }
            }
            break;
    }
    return out;
}

inline std::vector<GraphActivation> violated_activations(const LTGraph& g, const Model& m) {
    std::vector<GraphActivation> out;
    for (std::size_t i = 0; i < m.constraints().size(); ++i) {
        auto part = violated_activations(g, m.constraints()[i], i);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

inline bool is_goal(const LTGraph& g, const Model& m) {
    for (std::size_t i = 0; i < m.constraints().size(); ++i)
        if (!violated_activations(g, m.constraints()[i], i).empty()) return false;
    return true;
}

}  // namespace declarealign
