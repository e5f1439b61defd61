#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace declarealign {

using Activity = std::string;

// Activity names are case-sensitive, nonempty, and free of the characters
// that carry structure in the model grammar.
inline bool is_valid_activity_name(const std::string& name) {
    if (name.empty()) return false;
    if (name.front() == ' ' || name.back() == ' ') return false;
    return name.find_first_of("()[],\t\n\r") == std::string::npos;
}

// A set of interchangeable activities: any member can trigger or discharge
// the constraint parameter it instantiates. Stored sorted and deduplicated,
// so set equality is independent of declaration order.
class BranchSet {
public:
    BranchSet() = default;
    BranchSet(std::initializer_list<Activity> init) : members_(init) { normalize(); }
    explicit BranchSet(std::vector<Activity> members) : members_(std::move(members)) { normalize(); }

    const std::vector<Activity>& members() const { return members_; }
    bool empty() const { return members_.empty(); }
    std::size_t size() const { return members_.size(); }

    bool contains(const Activity& a) const {
        return std::binary_search(members_.begin(), members_.end(), a);
    }

    bool intersects(const BranchSet& other) const {
        for (const auto& m : members_)
            if (other.contains(m)) return true;
        return false;
    }

    bool subset_of(const BranchSet& other) const {
        return std::all_of(members_.begin(), members_.end(),
                           [&](const Activity& m) { return other.contains(m); });
    }

    BranchSet intersect(const BranchSet& other) const {
        std::vector<Activity> out;
        std::set_intersection(members_.begin(), members_.end(), other.members_.begin(),
                              other.members_.end(), std::back_inserter(out));
        return BranchSet(std::move(out));
    }

    BranchSet subtract(const BranchSet& other) const {
        std::vector<Activity> out;
        std::set_difference(members_.begin(), members_.end(), other.members_.begin(),
                            other.members_.end(), std::back_inserter(out));
        return BranchSet(std::move(out));
    }

    BranchSet unite(const BranchSet& other) const {
        std::vector<Activity> out;
        std::set_union(members_.begin(), members_.end(), other.members_.begin(),
                       other.members_.end(), std::back_inserter(out));
        return BranchSet(std::move(out));
    }

    auto operator<=>(const BranchSet&) const = default;

private:
    void normalize() {
        std::sort(members_.begin(), members_.end());
        members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    }

    std::vector<Activity> members_;
};

enum class TemplateKind {
    Existence,
    Participation,
    Absence,
    AtMostOne,
    Exactly,
    Init,
    End,
    Choice,
    ExclusiveChoice,
    RespondedExistence,
    Response,
    Precedence,
    AlternateResponse,
    AlternatePrecedence,
    ChainResponse,
    ChainPrecedence,
    CoExistence,
    Succession,
    AlternateSuccession,
    ChainSuccession,
    NotRespondedExistence,
    NotCoExistence,
    NotResponse,
    NotPrecedence,
    NotSuccession,
    NotChainResponse,
    NotChainPrecedence,
    NotChainSuccession,
};

// How repairs relate to the activation position: forward-looking templates are
// fixed after the activation, backward-looking before it, bidirectional ones on
// both sides, and always-active/choice templates constrain the whole trace.
enum class DirectionClass { AlwaysActive, Forward, Backward, Bidirectional, Choice };

enum class Polarity { Positive, Negative };

struct TemplateTraits {
    const char* name;
    int arity;           // number of branch-set parameters
    bool counted;        // leading integer parameter n
    DirectionClass direction;
    Polarity polarity;
};

inline const TemplateTraits& traits(TemplateKind kind) {
    using K = TemplateKind;
    using D = DirectionClass;
    using P = Polarity;
    static const struct Entry { K kind; TemplateTraits t; } table[] = {
        {K::Existence, {"Existence", 1, true, D::AlwaysActive, P::Positive}},
        {K::Participation, {"Participation", 1, false, D::AlwaysActive, P::Positive}},
        {K::Absence, {"Absence", 1, true, D::AlwaysActive, P::Positive}},
        {K::AtMostOne, {"AtMostOne", 1, false, D::AlwaysActive, P::Positive}},
        {K::Exactly, {"Exactly", 1, true, D::AlwaysActive, P::Positive}},
        {K::Init, {"Init", 1, false, D::AlwaysActive, P::Positive}},
        {K::End, {"End", 1, false, D::AlwaysActive, P::Positive}},
        {K::Choice, {"Choice", 2, false, D::Choice, P::Positive}},
        {K::ExclusiveChoice, {"ExclusiveChoice", 2, false, D::Choice, P::Positive}},
        {K::RespondedExistence, {"RespondedExistence", 2, false, D::Bidirectional, P::Positive}},
        {K::Response, {"Response", 2, false, D::Forward, P::Positive}},
        {K::Precedence, {"Precedence", 2, false, D::Backward, P::Positive}},
        {K::AlternateResponse, {"AlternateResponse", 2, false, D::Forward, P::Positive}},
        {K::AlternatePrecedence, {"AlternatePrecedence", 2, false, D::Backward, P::Positive}},
        {K::ChainResponse, {"ChainResponse", 2, false, D::Forward, P::Positive}},
        {K::ChainPrecedence, {"ChainPrecedence", 2, false, D::Backward, P::Positive}},
        {K::CoExistence, {"CoExistence", 2, false, D::Bidirectional, P::Positive}},
        {K::Succession, {"Succession", 2, false, D::Bidirectional, P::Positive}},
        {K::AlternateSuccession, {"AlternateSuccession", 2, false, D::Bidirectional, P::Positive}},
        {K::ChainSuccession, {"ChainSuccession", 2, false, D::Bidirectional, P::Positive}},
        {K::NotRespondedExistence,
         {"NotRespondedExistence", 2, false, D::Bidirectional, P::Negative}},
        {K::NotCoExistence, {"NotCoExistence", 2, false, D::Bidirectional, P::Negative}},
        {K::NotResponse, {"NotResponse", 2, false, D::Forward, P::Negative}},
        {K::NotPrecedence, {"NotPrecedence", 2, false, D::Backward, P::Negative}},
        {K::NotSuccession, {"NotSuccession", 2, false, D::Bidirectional, P::Negative}},
        {K::NotChainResponse, {"NotChainResponse", 2, false, D::Forward, P::Negative}},
        {K::NotChainPrecedence, {"NotChainPrecedence", 2, false, D::Backward, P::Negative}},
        {K::NotChainSuccession, {"NotChainSuccession", 2, false, D::Bidirectional, P::Negative}},
    };
    for (const auto& e : table)
        if (e.kind == kind) return e.t;
    throw std::logic_error("unknown template kind");
}

inline std::optional<TemplateKind> template_kind_from_name(const std::string& name) {
    using K = TemplateKind;
    for (K k : {K::Existence, K::Participation, K::Absence, K::AtMostOne, K::Exactly, K::Init,
                K::End, K::Choice, K::ExclusiveChoice, K::RespondedExistence, K::Response,
                K::Precedence, K::AlternateResponse, K::AlternatePrecedence, K::ChainResponse,
                K::ChainPrecedence, K::CoExistence, K::Succession, K::AlternateSuccession,
                K::ChainSuccession, K::NotRespondedExistence, K::NotCoExistence, K::NotResponse,
                K::NotPrecedence, K::NotSuccession, K::NotChainResponse, K::NotChainPrecedence,
                K::NotChainSuccession}) {
        if (name == traits(k).name) return k;
    }
    return std::nullopt;
}

inline constexpr TemplateKind all_template_kinds[] = {
    TemplateKind::Existence,
    TemplateKind::Participation,
    TemplateKind::Absence,
    TemplateKind::AtMostOne,
    TemplateKind::Exactly,
    TemplateKind::Init,
    TemplateKind::End,
    TemplateKind::Choice,
    TemplateKind::ExclusiveChoice,
    TemplateKind::RespondedExistence,
    TemplateKind::Response,
    TemplateKind::Precedence,
    TemplateKind::AlternateResponse,
    TemplateKind::AlternatePrecedence,
    TemplateKind::ChainResponse,
    TemplateKind::ChainPrecedence,
    TemplateKind::CoExistence,
    TemplateKind::Succession,
    TemplateKind::AlternateSuccession,
    TemplateKind::ChainSuccession,
    TemplateKind::NotRespondedExistence,
    TemplateKind::NotCoExistence,
    TemplateKind::NotResponse,
    TemplateKind::NotPrecedence,
    TemplateKind::NotSuccession,
    TemplateKind::NotChainResponse,
    TemplateKind::NotChainPrecedence,
    TemplateKind::NotChainSuccession,
};

struct Constraint {
    TemplateKind kind;
    std::vector<BranchSet> params;  // size == traits(kind).arity
    int n = 0;                      // meaningful only for counted templates, >= 1

    auto operator<=>(const Constraint&) const = default;
};

inline Constraint make_constraint(TemplateKind kind, std::vector<BranchSet> params, int n = 0) {
    const auto& t = traits(kind);
    if (static_cast<int>(params.size()) != t.arity)
        throw std::invalid_argument(std::string(t.name) + ": wrong number of parameters");
    for (const auto& p : params)
        if (p.empty()) throw std::invalid_argument(std::string(t.name) + ": empty branch set");
    if (t.counted && n < 1)
        throw std::invalid_argument(std::string(t.name) + ": count must be >= 1");
    return Constraint{kind, std::move(params), t.counted ? n : 0};
}

class Model {
public:
    Model() = default;
    explicit Model(std::vector<Constraint> constraints) {
        for (auto& c : constraints) add_constraint(std::move(c));
    }

    void add_constraint(Constraint c) {
        for (const auto& p : c.params)
            for (const auto& m : p.members()) alphabet_.insert(m);
        constraints_.push_back(std::move(c));
    }

    // Activities may belong to the model without appearing in any constraint.
    void declare_activity(const Activity& a) { alphabet_.insert(a); }

    const std::vector<Constraint>& constraints() const { return constraints_; }
    const std::set<Activity>& alphabet() const { return alphabet_; }

private:
    std::vector<Constraint> constraints_;
    std::set<Activity> alphabet_;
};

struct Trace {
    std::optional<std::string> id;
    std::vector<Activity> activities;
};

using Log = std::vector<Trace>;

}  // namespace declarealign
