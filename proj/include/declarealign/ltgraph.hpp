#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "model.hpp"

namespace declarealign {

using NodeId = std::uint32_t;

// One occurrence slot. Original cells come from the trace (singleton choices);
// inserted cells may offer several interchangeable activities until narrowed.
struct Cell {
    BranchSet choices;
    std::optional<std::size_t> trace_index;  // nullopt = inserted

    bool original() const { return trace_index.has_value(); }
    auto operator<=>(const Cell&) const = default;
};

inline Cell original_cell(Activity a, std::size_t trace_index) {
    return Cell{BranchSet{std::move(a)}, trace_index};
}

inline Cell inserted_cell(BranchSet choices) { return Cell{std::move(choices), std::nullopt}; }

// A node is a chain of cells: consecutive cells are immediately adjacent in
// every linearization, and the whole chain is emitted contiguously.
struct LTNode {
    NodeId id = 0;
    std::vector<Cell> chain;
    bool pinned_first = false;
    bool pinned_last = false;

    auto operator<=>(const LTNode&) const = default;
};

struct Site {
    NodeId node = 0;
    std::size_t cell = 0;

    auto operator<=>(const Site&) const = default;
};

enum class PinSide { First, Last };

struct InsertNode {
    std::vector<Cell> cells;  // chain content of the new node
    std::vector<NodeId> preds;
    std::vector<NodeId> succs;

    auto operator<=>(const InsertNode&) const = default;
};
struct RemoveNode {
    NodeId node = 0;
    std::size_t cell = 0;  // removing the only cell removes the node

    auto operator<=>(const RemoveNode&) const = default;
};
struct AddArc {
    NodeId from = 0;
    NodeId to = 0;

    auto operator<=>(const AddArc&) const = default;
};
struct PinNode {
    NodeId node = 0;
    PinSide side = PinSide::First;

    auto operator<=>(const PinNode&) const = default;
};
struct SubsetCell {
    NodeId node = 0;
    std::size_t cell = 0;
    BranchSet choices;  // must be a nonempty subset of the current choices

    auto operator<=>(const SubsetCell&) const = default;
};
struct MergeChains {
    NodeId front = 0;
    NodeId back = 0;

    auto operator<=>(const MergeChains&) const = default;
};
struct SplitChain {
    NodeId node = 0;
    std::size_t cut = 0;  // cells [0,cut) stay, [cut,..) move to a new node

    auto operator<=>(const SplitChain&) const = default;
};

using Fix = std::variant<InsertNode, RemoveNode, AddArc, PinNode, SubsetCell, MergeChains,
                         SplitChain>;

struct LinearizationSet {
    std::vector<std::vector<Activity>> sequences;
    bool truncated = false;
};

// Immutable partial-order state: apply() returns a new graph and never mutates.
// The result of a fix may be cyclic; callers are expected to check has_cycle().
class LTGraph {
public:
    LTGraph() = default;

    static LTGraph from_trace(const std::vector<Activity>& trace) {
        LTGraph g;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            LTNode node;
            node.id = g.next_id_++;
            node.chain.push_back(original_cell(trace[i], i));
            g.nodes_.push_back(std::move(node));
        }
        for (std::size_t i = 0; i + 1 < trace.size(); ++i)
            g.arcs_.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
        return g;
    }

    const std::vector<LTNode>& nodes() const { return nodes_; }
    const std::vector<std::pair<NodeId, NodeId>>& arcs() const { return arcs_; }
    NodeId next_id() const { return next_id_; }
    bool empty() const { return nodes_.empty(); }

    bool contains(NodeId id) const { return find_index(id).has_value(); }

    const LTNode& node(NodeId id) const {
        auto idx = find_index(id);
        if (!idx) throw std::invalid_argument("dangling node id " + std::to_string(id));
        return nodes_[*idx];
    }

    const Cell& cell(const Site& s) const {
        const LTNode& n = node(s.node);
        if (s.cell >= n.chain.size())
            throw std::invalid_argument("dangling cell index " + std::to_string(s.cell));
        return n.chain[s.cell];
    }

    std::vector<NodeId> preds(NodeId id) const {
        std::vector<NodeId> out;
        for (const auto& [a, b] : arcs_)
            if (b == id) out.push_back(a);
        return out;
    }

    std::vector<NodeId> succs(NodeId id) const {
        std::vector<NodeId> out;
        for (const auto& [a, b] : arcs_)
            if (a == id) out.push_back(b);
        return out;
    }

    std::optional<NodeId> pinned_first_node() const {
        for (const auto& n : nodes_)
            if (n.pinned_first) return n.id;
        return std::nullopt;
    }

    std::optional<NodeId> pinned_last_node() const {
        for (const auto& n : nodes_)
            if (n.pinned_last) return n.id;
        return std::nullopt;
    }

    bool operator==(const LTGraph& other) const {
        return nodes_ == other.nodes_ && arcs_ == other.arcs_ && next_id_ == other.next_id_;
    }

    LTGraph apply(const Fix& fix) const {
        LTGraph g = *this;
        std::visit([&g](const auto& f) { g.apply_one(f); }, fix);
        g.normalize_arcs();
        return g;
    }

    LTGraph apply_all(const std::vector<Fix>& fixes) const {
        LTGraph g = *this;
        for (const auto& f : fixes) {
            std::visit([&g](const auto& x) { g.apply_one(x); }, f);
            g.normalize_arcs();
        }
        return g;
    }

    bool has_cycle() const {
        std::map<NodeId, std::size_t> indegree;
        for (const auto& n : nodes_) indegree[n.id] = 0;
        for (const auto& [a, b] : arcs_) {
            if (a == b) return true;
            ++indegree[b];
        }
        std::vector<NodeId> ready;
        for (const auto& [id, d] : indegree)
            if (d == 0) ready.push_back(id);
        std::size_t seen = 0;
        while (!ready.empty()) {
            NodeId u = ready.back();
            ready.pop_back();
            ++seen;
            for (const auto& [a, b] : arcs_)
                if (a == u && --indegree[b] == 0) ready.push_back(b);
        }
        return seen != nodes_.size();
    }

    // Strict reachability over arcs; pos() maps ids to matrix rows.
    struct Reachability {
        std::vector<NodeId> ids;
        std::map<NodeId, std::size_t> pos;
        std::vector<std::vector<bool>> matrix;

        bool reaches(NodeId a, NodeId b) const { return matrix[pos.at(a)][pos.at(b)]; }
    };

    Reachability reachability() const {
        Reachability r;
        for (const auto& n : nodes_) {
            r.pos[n.id] = r.ids.size();
            r.ids.push_back(n.id);
        }
        const std::size_t n = r.ids.size();
        r.matrix.assign(n, std::vector<bool>(n, false));
        for (const auto& [a, b] : arcs_) r.matrix[r.pos[a]][r.pos[b]] = true;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                if (r.matrix[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (r.matrix[k][j]) r.matrix[i][j] = true;
        return r;
    }

    // Deterministic topological order: prefer nodes holding earlier original
    // trace positions, then original content over purely inserted nodes, then
    // lexicographically smaller chain choices, then the stable node id.
    std::vector<NodeId> topological_nodes() const {
        std::map<NodeId, std::size_t> indegree;
        for (const auto& n : nodes_) indegree[n.id] = 0;
        for (const auto& [a, b] : arcs_) ++indegree[b];

        auto key = [this](NodeId id) {
            const LTNode& n = node(id);
            std::size_t min_orig = SIZE_MAX;
            for (const auto& c : n.chain)
                if (c.trace_index) min_orig = std::min(min_orig, *c.trace_index);
            std::vector<BranchSet> content;
            for (const auto& c : n.chain) content.push_back(c.choices);
            return std::tuple(min_orig, content, id);
        };

        std::vector<NodeId> order;
        std::set<NodeId> ready;
        for (const auto& [id, d] : indegree)
            if (d == 0) ready.insert(id);
        while (!ready.empty()) {
            NodeId best = *ready.begin();
            for (NodeId cand : ready)
                if (key(cand) < key(best)) best = cand;
            ready.erase(best);
            order.push_back(best);
            for (const auto& [a, b] : arcs_)
                if (a == best && --indegree[b] == 0) ready.insert(b);
        }
        if (order.size() != nodes_.size())
            throw std::logic_error("topological sort of a cyclic graph");
        return order;
    }

    std::vector<Site> topological_sites() const {
        std::vector<Site> out;
        for (NodeId id : topological_nodes()) {
            const LTNode& n = node(id);
            for (std::size_t i = 0; i < n.chain.size(); ++i) out.push_back({id, i});
        }
        return out;
    }

    // All sequences the graph admits: every interleaving consistent with the
    // arcs (chains stay contiguous) crossed with every branch resolution.
    LinearizationSet linearizations(std::size_t limit = SIZE_MAX) const {
        LinearizationSet out;
        std::set<std::vector<Activity>> seen;
        std::map<NodeId, std::size_t> indegree;
        for (const auto& n : nodes_) indegree[n.id] = 0;
        for (const auto& [a, b] : arcs_) ++indegree[b];
        std::vector<NodeId> order;
        bool stop = false;

        auto resolve = [&](auto&& self, const std::vector<const Cell*>& cells, std::size_t at,
                           std::vector<Activity>& prefix) -> void {
            if (stop) return;
            if (at == cells.size()) {
                if (seen.size() >= limit && !seen.count(prefix)) {
                    out.truncated = true;
                    stop = true;
                    return;
                }
                seen.insert(prefix);
                return;
            }
            for (const auto& m : cells[at]->choices.members()) {
                prefix.push_back(m);
                self(self, cells, at + 1, prefix);
                prefix.pop_back();
                if (stop) return;
            }
        };

        auto enumerate = [&](auto&& self) -> void {
            if (stop) return;
            if (order.size() == nodes_.size()) {
                std::vector<const Cell*> cells;
                for (NodeId id : order)
                    for (const auto& c : node(id).chain) cells.push_back(&c);
                std::vector<Activity> prefix;
                resolve(resolve, cells, 0, prefix);
                return;
            }
            for (const auto& n : nodes_) {
                if (indegree[n.id] != 0) continue;
                indegree[n.id] = SIZE_MAX;  // taken
                order.push_back(n.id);
                for (const auto& [a, b] : arcs_)
                    if (a == n.id) --indegree[b];
                self(self);
                for (const auto& [a, b] : arcs_)
                    if (a == n.id) ++indegree[b];
                order.pop_back();
                indegree[n.id] = 0;
                if (stop) return;
            }
        };
        enumerate(enumerate);
        out.sequences.assign(seen.begin(), seen.end());
        return out;
    }

    // Canonical form: stable under node-id relabeling and under adding or
    // removing transitively implied arcs. Uses the unique transitive reduction
    // plus color refinement, then serializes nodes in canonical order.
    std::string canonical_fingerprint() const {
        const std::size_t n = nodes_.size();
        std::vector<std::size_t> idx(n);
        std::map<NodeId, std::size_t> pos;
        for (std::size_t i = 0; i < n; ++i) pos[nodes_[i].id] = i;

        const auto reach = reachability();
        auto reduced = [&](std::size_t u, std::size_t v) {
            const NodeId a = nodes_[u].id, b = nodes_[v].id;
            if (!std::binary_search(arcs_.begin(), arcs_.end(), std::pair(a, b))) return false;
            for (const auto& w : nodes_) {
                if (w.id == a || w.id == b) continue;
                if (reach.reaches(a, w.id) && reach.reaches(w.id, b)) return false;
            }
            return true;
        };
        std::vector<std::vector<std::size_t>> rpred(n), rsucc(n);
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = 0; v < n; ++v)
                if (u != v && reduced(u, v)) {
                    rsucc[u].push_back(v);
                    rpred[v].push_back(u);
                }

        std::vector<std::string> base(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::ostringstream os;
            const LTNode& nd = nodes_[i];
            if (nd.pinned_first) os << "F";
            if (nd.pinned_last) os << "L";
            for (const auto& c : nd.chain) {
                os << '(';
                for (const auto& m : c.choices.members()) os << m << '|';
                if (c.trace_index)
                    os << 'o' << *c.trace_index;
                else
                    os << 'i';
                os << ')';
            }
            base[i] = os.str();
        }

        // color refinement; class ids follow the sorted key order so they do
        // not depend on node storage order
        auto renumber = [](auto& keys, std::vector<std::size_t>& out) {
            auto sorted = keys;
            std::sort(sorted.begin(), sorted.end());
            sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
            for (std::size_t i = 0; i < keys.size(); ++i)
                out[i] = static_cast<std::size_t>(
                    std::lower_bound(sorted.begin(), sorted.end(), keys[i]) - sorted.begin());
        };
        std::vector<std::size_t> color(n);
        renumber(base, color);
        for (std::size_t round = 0; round < n; ++round) {
            using Key = std::tuple<std::size_t, std::vector<std::size_t>, std::vector<std::size_t>>;
            std::vector<Key> keys(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<std::size_t> pc, sc;
                for (auto p : rpred[i]) pc.push_back(color[p]);
                for (auto s : rsucc[i]) sc.push_back(color[s]);
                std::sort(pc.begin(), pc.end());
                std::sort(sc.begin(), sc.end());
                keys[i] = Key{color[i], std::move(pc), std::move(sc)};
            }
            std::vector<std::size_t> next(n);
            renumber(keys, next);
            if (next == color) break;
            color = std::move(next);
        }

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (color[a] != color[b]) return color[a] < color[b];
            if (base[a] != base[b]) return base[a] < base[b];
            return nodes_[a].id < nodes_[b].id;
        });
        std::vector<std::size_t> canon_pos(n);
        for (std::size_t i = 0; i < n; ++i) canon_pos[order[i]] = i;

        std::ostringstream os;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t u = order[i];
            os << '[' << base[u] << "->";
            std::vector<std::size_t> outs;
            for (auto s : rsucc[u]) outs.push_back(canon_pos[s]);
            std::sort(outs.begin(), outs.end());
            for (auto p : outs) os << p << ',';
            os << ']';
        }
        return os.str();
    }

    std::string debug_string() const {
        std::ostringstream os;
        for (const auto& n : nodes_) {
            os << 'n' << n.id << ':';
            for (std::size_t i = 0; i < n.chain.size(); ++i) {
                if (i > 0) os << '>';
                const auto& c = n.chain[i];
                os << ' ';
                if (c.choices.size() > 1) os << '[';
                for (std::size_t m = 0; m < c.choices.members().size(); ++m) {
                    if (m > 0) os << ',';
                    os << c.choices.members()[m];
                }
                if (c.choices.size() > 1) os << ']';
                if (c.trace_index)
                    os << "@" << *c.trace_index;
                else
                    os << "@ins";
            }
            if (n.pinned_first) os << " pin=first";
            if (n.pinned_last) os << " pin=last";
            os << '\n';
        }
        os << "arcs:";
        for (const auto& [a, b] : arcs_) os << ' ' << a << "->" << b;
        os << '\n';
        return os.str();
    }

private:
    std::optional<std::size_t> find_index(NodeId id) const {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].id == id) return i;
        return std::nullopt;
    }

    LTNode& mutable_node(NodeId id) {
        auto idx = find_index(id);
        if (!idx) throw std::invalid_argument("dangling node id " + std::to_string(id));
        return nodes_[*idx];
    }

    void normalize_arcs() {
        std::sort(arcs_.begin(), arcs_.end());
        arcs_.erase(std::unique(arcs_.begin(), arcs_.end()), arcs_.end());
    }

    void add_arc_raw(NodeId a, NodeId b) { arcs_.emplace_back(a, b); }

    void drop_arcs_of(NodeId id) {
        std::erase_if(arcs_, [id](const auto& arc) { return arc.first == id || arc.second == id; });
    }

    void apply_one(const InsertNode& f) {
        if (f.cells.empty()) throw std::invalid_argument("inserting a node with no cells");
        for (const auto& c : f.cells)
            if (c.choices.empty()) throw std::invalid_argument("inserting an empty cell");
        for (NodeId p : f.preds) mutable_node(p);
        for (NodeId s : f.succs) mutable_node(s);

        LTNode node;
        node.id = next_id_++;
        node.chain = f.cells;
        for (NodeId p : f.preds) add_arc_raw(p, node.id);
        for (NodeId s : f.succs) add_arc_raw(node.id, s);
        // pinned nodes keep their position relative to everything added later
        for (const auto& other : nodes_) {
            if (other.pinned_first) add_arc_raw(other.id, node.id);
            if (other.pinned_last) add_arc_raw(node.id, other.id);
        }
        nodes_.push_back(std::move(node));
    }

    void apply_one(const RemoveNode& f) {
        LTNode& n = mutable_node(f.node);
        if (f.cell >= n.chain.size())
            throw std::invalid_argument("removing a cell at an invalid index");
        if (n.chain.size() > 1) {
            n.chain.erase(n.chain.begin() + static_cast<std::ptrdiff_t>(f.cell));
            return;
        }
        const auto ps = preds(f.node);
        const auto ss = succs(f.node);
        drop_arcs_of(f.node);
        for (NodeId p : ps)
            for (NodeId s : ss)
                if (p != s) add_arc_raw(p, s);
        std::erase_if(nodes_, [&](const LTNode& x) { return x.id == f.node; });
    }

    void apply_one(const AddArc& f) {
        if (f.from == f.to) throw std::invalid_argument("self arc");
        mutable_node(f.from);
        mutable_node(f.to);
        add_arc_raw(f.from, f.to);
    }

    void apply_one(const PinNode& f) {
        LTNode& n = mutable_node(f.node);
        if (f.side == PinSide::First) {
            if (auto existing = pinned_first_node(); existing && *existing != f.node)
                throw std::invalid_argument("another node is already pinned first");
            n.pinned_first = true;
            for (const auto& other : nodes_)
                if (other.id != f.node) add_arc_raw(f.node, other.id);
        } else {
            if (auto existing = pinned_last_node(); existing && *existing != f.node)
                throw std::invalid_argument("another node is already pinned last");
            n.pinned_last = true;
            for (const auto& other : nodes_)
                if (other.id != f.node) add_arc_raw(other.id, f.node);
        }
    }

    void apply_one(const SubsetCell& f) {
        LTNode& n = mutable_node(f.node);
        if (f.cell >= n.chain.size())
            throw std::invalid_argument("subsetting a cell at an invalid index");
        if (f.choices.empty()) throw std::invalid_argument("subsetting to an empty set");
        if (!f.choices.subset_of(n.chain[f.cell].choices))
            throw std::invalid_argument("subset must shrink the current choices");
        n.chain[f.cell].choices = f.choices;
    }

    void apply_one(const MergeChains& f) {
        if (f.front == f.back) throw std::invalid_argument("merging a node with itself");
        LTNode& front = mutable_node(f.front);
        LTNode back = node(f.back);
        front.chain.insert(front.chain.end(), back.chain.begin(), back.chain.end());
        front.pinned_first = front.pinned_first || back.pinned_first;
        front.pinned_last = front.pinned_last || back.pinned_last;
        // the direct adjacency arc is absorbed by the chain; other arcs follow
        std::erase(arcs_, std::pair(f.front, f.back));
        for (auto& [a, b] : arcs_) {
            if (a == f.back) a = f.front;
            if (b == f.back) b = f.front;
        }
        std::erase_if(nodes_, [&](const LTNode& x) { return x.id == f.back; });
    }

    void apply_one(const SplitChain& f) {
        LTNode& n = mutable_node(f.node);
        if (f.cut == 0 || f.cut >= n.chain.size())
            throw std::invalid_argument("splitting at an invalid cut");
        LTNode back;
        back.id = next_id_++;
        back.chain.assign(n.chain.begin() + static_cast<std::ptrdiff_t>(f.cut), n.chain.end());
        back.pinned_last = n.pinned_last;
        n.chain.resize(f.cut);
        n.pinned_last = false;
        for (auto& [a, b] : arcs_) {
            if (a == f.node) a = back.id;  // outgoing arcs follow the tail
        }
        add_arc_raw(f.node, back.id);
        nodes_.push_back(std::move(back));
    }

    std::vector<LTNode> nodes_;                       // insertion order, ids unique
    std::vector<std::pair<NodeId, NodeId>> arcs_;     // sorted, unique
    NodeId next_id_ = 0;
};

}  // namespace declarealign
