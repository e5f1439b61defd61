#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "model.hpp"
#include "sequence_eval.hpp"

namespace declarealign {

// Per-activity prices of the two asynchronous move kinds; synchronous moves
// are free. All costs are strictly positive, absent activities cost 1.
struct CostFunction {
    std::map<Activity, double> model_move;  // insertion into the model run
    std::map<Activity, double> log_move;    // removal of a logged event

    double model_move_cost(const Activity& a) const {
        auto it = model_move.find(a);
        return it == model_move.end() ? 1.0 : it->second;
    }

    double log_move_cost(const Activity& a) const {
        auto it = log_move.find(a);
        return it == log_move.end() ? 1.0 : it->second;
    }

    double min_model_move_cost(const BranchSet& set) const {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& m : set.members()) best = std::min(best, model_move_cost(m));
        return best;
    }

    bool uniform() const {
        for (const auto& [a, c] : model_move)
            if (c != 1.0) return false;
        for (const auto& [a, c] : log_move)
            if (c != 1.0) return false;
        return true;
    }
};

enum class MoveKind { Synchronous, Log, Model };

struct Move {
    MoveKind kind = MoveKind::Synchronous;
    std::optional<Activity> log;    // absent for model moves
    std::optional<Activity> model;  // absent for log moves

    auto operator<=>(const Move&) const = default;
};

inline Move sync_move(Activity a) { return {MoveKind::Synchronous, a, a}; }
inline Move log_move(Activity a) { return {MoveKind::Log, std::move(a), std::nullopt}; }
inline Move model_move(Activity a) { return {MoveKind::Model, std::nullopt, std::move(a)}; }

struct Alignment {
    std::vector<Move> moves;
    double cost = 0.0;
};

inline std::vector<Activity> log_projection(const Alignment& a) {
    std::vector<Activity> out;
    for (const auto& m : a.moves)
        if (m.log) out.push_back(*m.log);
    return out;
}

inline std::vector<Activity> model_projection(const Alignment& a) {
    std::vector<Activity> out;
    for (const auto& m : a.moves)
        if (m.model) out.push_back(*m.model);
    return out;
}

inline double alignment_cost(const Alignment& a, const CostFunction& cf) {
    double total = 0.0;
    for (const auto& m : a.moves) {
        if (m.kind == MoveKind::Log) total += cf.log_move_cost(*m.log);
        if (m.kind == MoveKind::Model) total += cf.model_move_cost(*m.model);
    }
    return total;
}

// The three validity checks every returned alignment must pass.
struct ValidationReport {
    bool log_matches = false;
    bool model_satisfied = false;
    bool cost_matches = false;

    bool ok() const { return log_matches && model_satisfied && cost_matches; }
};

inline ValidationReport validate_alignment(const Alignment& a, const Trace& t, const Model& m,
                                           const CostFunction& cf) {
    ValidationReport r;
    r.log_matches = log_projection(a) == t.activities;
    r.model_satisfied = satisfies_all(m, model_projection(a));
    r.cost_matches = alignment_cost(a, cf) == a.cost;
    for (const auto& mv : a.moves) {
        const bool shape_ok =
            (mv.kind == MoveKind::Synchronous && mv.log && mv.model && *mv.log == *mv.model) ||
            (mv.kind == MoveKind::Log && mv.log && !mv.model) ||
            (mv.kind == MoveKind::Model && !mv.log && mv.model);
        if (!shape_ok) r.log_matches = r.model_satisfied = r.cost_matches = false;
    }
    return r;
}

}  // namespace declarealign
