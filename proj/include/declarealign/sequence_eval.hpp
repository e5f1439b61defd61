#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "model.hpp"

namespace declarealign {

enum class ActivationState { Fulfilled, Violated };

// One activation of a constraint: either a concrete position in the sequence
// (occurrence-activated templates) or the whole trace (always-active ones).
struct ActivationStatus {
    std::optional<std::size_t> position;
    ActivationState state = ActivationState::Fulfilled;

    auto operator<=>(const ActivationStatus&) const = default;
};

struct SequenceEvaluation {
    bool satisfied = true;
    std::vector<ActivationStatus> activations;
};

namespace detail {

inline std::size_t count_in(const std::vector<Activity>& s, const BranchSet& set) {
    std::size_t n = 0;
    for (const auto& a : s)
        if (set.contains(a)) ++n;
    return n;
}

inline bool occurs(const std::vector<Activity>& s, const BranchSet& set) {
    for (const auto& a : s)
        if (set.contains(a)) return true;
    return false;
}

// Condition of one occurrence-activated side, evaluated at position i.
inline bool side_condition(TemplateKind kind, bool first_side, const std::vector<Activity>& s,
                           std::size_t i, const BranchSet& s1, const BranchSet& s2) {
    using K = TemplateKind;
    const std::size_t n = s.size();
    switch (kind) {
        case K::RespondedExistence:
            return occurs(s, s2);
        case K::CoExistence:
            return first_side ? occurs(s, s2) : occurs(s, s1);
        case K::Response:
            for (std::size_t j = i + 1; j < n; ++j)
                if (s2.contains(s[j])) return true;
            return false;
        case K::Precedence:
            for (std::size_t j = 0; j < i; ++j)
                if (s1.contains(s[j])) return true;
            return false;
        case K::AlternateResponse:
            for (std::size_t j = i + 1; j < n; ++j) {
                if (s2.contains(s[j])) return true;  // target reached first
                if (s1.contains(s[j])) return false; // repeated activation intervenes
            }
            return false;
        case K::AlternatePrecedence:
            for (std::size_t j = i; j-- > 0;) {
                if (s1.contains(s[j])) return true;
                if (s2.contains(s[j])) return false;
            }
            return false;
        case K::ChainResponse:
            return i + 1 < n && s2.contains(s[i + 1]);
        case K::ChainPrecedence:
            return i >= 1 && s1.contains(s[i - 1]);
        case K::Succession:
            return side_condition(first_side ? K::Response : K::Precedence, true, s, i, s1, s2);
        case K::AlternateSuccession:
            return side_condition(first_side ? K::AlternateResponse : K::AlternatePrecedence, true,
                                  s, i, s1, s2);
        case K::ChainSuccession:
            return side_condition(first_side ? K::ChainResponse : K::ChainPrecedence, true, s, i,
                                  s1, s2);
        case K::NotRespondedExistence:
            return !occurs(s, s2);
        case K::NotCoExistence:
            return first_side ? !occurs(s, s2) : !occurs(s, s1);
        case K::NotResponse:
            for (std::size_t j = i + 1; j < n; ++j)
                if (s2.contains(s[j])) return false;
            return true;
        case K::NotPrecedence:
            for (std::size_t j = 0; j < i; ++j)
                if (s1.contains(s[j])) return false;
            return true;
        case K::NotSuccession:
            return side_condition(first_side ? K::NotResponse : K::NotPrecedence, true, s, i, s1,
                                  s2);
        case K::NotChainResponse:
            return !(i + 1 < n && s2.contains(s[i + 1]));
        case K::NotChainPrecedence:
            return !(i >= 1 && s1.contains(s[i - 1]));
        case K::NotChainSuccession:
            return side_condition(first_side ? K::NotChainResponse : K::NotChainPrecedence, true,
                                  s, i, s1, s2);
        default:
            throw std::logic_error("side_condition: not an occurrence-activated template");
    }
}

// Which side(s) of the template an occurrence of activity a activates.
// Templates whose repairs look backward activate on the second parameter.
inline bool activates_first_side(TemplateKind kind, const Activity& a, const BranchSet& s1) {
    using K = TemplateKind;
    switch (kind) {
        case K::RespondedExistence:
        case K::Response:
        case K::AlternateResponse:
        case K::ChainResponse:
        case K::NotRespondedExistence:
        case K::NotResponse:
        case K::NotChainResponse:
        case K::CoExistence:
        case K::Succession:
        case K::AlternateSuccession:
        case K::ChainSuccession:
        case K::NotCoExistence:
        case K::NotSuccession:
        case K::NotChainSuccession:
            return s1.contains(a);
        default:
            return false;
    }
}

inline bool activates_second_side(TemplateKind kind, const Activity& a, const BranchSet& s2) {
    using K = TemplateKind;
    switch (kind) {
        case K::Precedence:
        case K::AlternatePrecedence:
        case K::ChainPrecedence:
        case K::NotPrecedence:
        case K::NotChainPrecedence:
        case K::CoExistence:
        case K::Succession:
        case K::AlternateSuccession:
        case K::ChainSuccession:
        case K::NotCoExistence:
        case K::NotSuccession:
        case K::NotChainSuccession:
            return s2.contains(a);
        default:
            return false;
    }
}

}  // namespace detail

// Ground-truth semantics of a constraint over a plain activity sequence.
// Also the arbiter used to validate extracted alignments and oracle results.
inline SequenceEvaluation evaluate_sequence(const Constraint& c,
                                            const std::vector<Activity>& s) {
    using K = TemplateKind;
    SequenceEvaluation out;
    const BranchSet& s1 = c.params[0];
    const BranchSet* s2 = c.params.size() > 1 ? &c.params[1] : nullptr;

    auto whole_trace = [&](bool ok) {
        out.activations.push_back(
            {std::nullopt, ok ? ActivationState::Fulfilled : ActivationState::Violated});
    };

    switch (c.kind) {
        case K::Existence:
            whole_trace(detail::count_in(s, s1) >= static_cast<std::size_t>(c.n));
            break;
        case K::Participation:
            whole_trace(detail::count_in(s, s1) >= 1);
            break;
        case K::Absence:
            whole_trace(detail::count_in(s, s1) + 1 <= static_cast<std::size_t>(c.n));
            break;
        case K::AtMostOne:
            whole_trace(detail::count_in(s, s1) <= 1);
            break;
        case K::Exactly:
            whole_trace(detail::count_in(s, s1) == static_cast<std::size_t>(c.n));
            break;
        case K::Init:
            whole_trace(!s.empty() && s1.contains(s.front()));
            break;
        case K::End:
            whole_trace(!s.empty() && s1.contains(s.back()));
            break;
        case K::Choice:
            whole_trace(detail::occurs(s, s1) || detail::occurs(s, *s2));
            break;
        case K::ExclusiveChoice: {
            const bool o1 = detail::occurs(s, s1);
            const bool o2 = detail::occurs(s, *s2);
            whole_trace((o1 || o2) && !(o1 && o2));
            break;
        }
        default:
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (detail::activates_first_side(c.kind, s[i], s1)) {
                    const bool ok = detail::side_condition(c.kind, true, s, i, s1, *s2);
                    out.activations.push_back(
                        {i, ok ? ActivationState::Fulfilled : ActivationState::Violated});
                }
                if (detail::activates_second_side(c.kind, s[i], *s2)) {
                    const bool ok = detail::side_condition(c.kind, false, s, i, s1, *s2);
                    out.activations.push_back(
                        {i, ok ? ActivationState::Fulfilled : ActivationState::Violated});
                }
            }
            break;
    }

    out.satisfied = std::all_of(out.activations.begin(), out.activations.end(),
                                [](const ActivationStatus& a) {
                                    return a.state == ActivationState::Fulfilled;
                                });
    return out;
}

inline bool satisfies_all(const Model& m, const std::vector<Activity>& s) {
    return std::all_of(m.constraints().begin(), m.constraints().end(),
                       [&](const Constraint& c) { return evaluate_sequence(c, s).satisfied; });
}

}  // namespace declarealign
