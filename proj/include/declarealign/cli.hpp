#pragma once

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "align.hpp"
#include "oracle.hpp"
#include "parse.hpp"

namespace declarealign {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitTimeout = 2;
inline constexpr int kExitUnsatisfiable = 3;

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AlignFlags {
    std::string model_path;
    std::string log_path;
    std::string trace_id;          // empty: align the only trace / all traces
    double timeout_seconds = 0.0;  // 0: env var or library default
    std::string costs_path;
    bool no_early_pruning = false;
    bool no_chain_preprocessing = false;
    bool no_grouped_fixes = false;
    std::string out_path;  // empty: stdout; directory: one file per trace
    std::string format = "json";
};

struct BatchFlags {
    std::string model_path;
    std::string log_path;
    std::string metrics_path;
    double timeout_seconds = 0.0;
    bool no_early_pruning = false;
    bool no_chain_preprocessing = false;
    bool no_grouped_fixes = false;
    unsigned jobs = 1;
};

struct VerifyFlags {
    std::size_t instances = 0;
    std::uint64_t seed = 0;
    double max_cost = 6.0;
    std::size_t alphabet_size = 4;
    std::size_t constraint_count = 3;
    std::size_t trace_length = 6;
    double timeout_seconds = 0.0;
};

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CliError("cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// temp file + rename, so readers never observe a half-written file
inline void atomic_write_file(const std::filesystem::path& target, const std::string& content) {
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw CliError("cannot write " + tmp.string());
        os << content;
        os.flush();
        if (!os) throw CliError("failed while writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw CliError("cannot move " + tmp.string() + " to " + target.string());
}

inline double resolve_timeout(double flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("DECLAREALIGN_TIMEOUT")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end == env || *end != '\0' || !(v > 0))
            throw CliError("DECLAREALIGN_TIMEOUT must be a positive number");
        return v;
    }
    return SearchConfig{}.timeout_seconds;
}

inline SearchConfig make_config(bool no_ep, bool no_cp, bool no_gf, double timeout_flag,
                                CostFunction cf) {
    SearchConfig cfg;
    cfg.early_pruning = !no_ep;
    cfg.chain_preprocessing = !no_cp;
    cfg.grouped_fixes = !no_gf;
    cfg.timeout_seconds = resolve_timeout(timeout_flag);
    cfg.cost_function = std::move(cf);
    return cfg;
}

inline double positive_field(const std::string& text, std::size_t line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ParseError(line_no, "expected a number, got '" + text + "'");
    }
    if (used != text.size() || !(v > 0))
        throw ParseError(line_no, "costs must be positive numbers, got '" + text + "'");
    return v;
}

}  // namespace detail

// Per-activity move prices; unlisted activities keep the default cost of 1.
inline CostFunction parse_costs_csv(std::string_view text) {
    const auto lines = detail::lines_of(text);
    CostFunction cf;
    bool seen_header = false;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::size_t line_no = li + 1;
        const std::string line = detail::trim(lines[li]);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = detail::split(line, ',');
        if (!seen_header) {
            if (fields.size() != 3 || detail::trim(fields[0]) != "activity" ||
                detail::trim(fields[1]) != "model_move_cost" ||
                detail::trim(fields[2]) != "log_move_cost")
                throw ParseError(line_no, "expected header activity,model_move_cost,log_move_cost");
            seen_header = true;
            continue;
        }
        if (fields.size() != 3)
            throw ParseError(line_no, "expected activity,model_move_cost,log_move_cost");
        const Activity a = detail::checked_activity(fields[0], line_no);
        cf.model_move[a] = detail::positive_field(detail::trim(fields[1]), line_no);
        cf.log_move[a] = detail::positive_field(detail::trim(fields[2]), line_no);
    }
    if (!seen_header) throw ParseError(1, "missing costs header");
    return cf;
}

namespace detail {

inline std::string format_number(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15)
        return std::to_string(static_cast<long long>(v));
    std::ostringstream os;
    os << v;
    return os.str();
}

inline const char* move_kind_name(MoveKind k) {
    switch (k) {
        case MoveKind::Synchronous: return "synchronous";
        case MoveKind::Log: return "log";
        default: return "model";
    }
}

inline std::string sanitize_filename(const std::string& id) {
    std::string out;
    for (char ch : id)
        out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_' || ch == '-'
                   ? ch
                   : '_';
    return out.empty() ? std::string("trace") : out;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char ch : s) {
        if (ch == '"') quoted += '"';
        quoted += ch;
    }
    quoted += '"';
    return quoted;
}

}  // namespace detail

inline nlohmann::json result_json(const std::string& trace_id, const AlignResult& r) {
    nlohmann::json moves = nlohmann::json::array();
    if (r.alignment) {
        for (const auto& mv : r.alignment->moves) {
            nlohmann::json jm;
            jm["kind"] = detail::move_kind_name(mv.kind);
            jm["log"] = mv.log ? nlohmann::json(*mv.log) : nlohmann::json();
            jm["model"] = mv.model ? nlohmann::json(*mv.model) : nlohmann::json();
            moves.push_back(std::move(jm));
        }
    }
    nlohmann::json j;
    j["trace_id"] = trace_id;
    if (r.alignment) {
        const double c = r.alignment->cost;
        if (c == std::floor(c) && std::abs(c) < 1e15)
            j["cost"] = static_cast<std::int64_t>(c);
        else
            j["cost"] = c;
    } else {
        j["cost"] = nullptr;
    }
    j["moves"] = std::move(moves);
    j["stats"] = {{"expanded_states", r.stats.expanded_states},
                  {"discovered_states", r.stats.discovered_states},
                  {"time_ms", r.stats.time_ms},
                  {"timed_out", r.stats.timed_out}};
    return j;
}

inline Alignment alignment_from_json(const nlohmann::json& j) {
    Alignment a;
    for (const auto& jm : j.at("moves")) {
        Move mv;
        const std::string kind = jm.at("kind").get<std::string>();
        mv.kind = kind == "synchronous" ? MoveKind::Synchronous
                  : kind == "log"      ? MoveKind::Log
                                       : MoveKind::Model;
        if (!jm.at("log").is_null()) mv.log = jm.at("log").get<std::string>();
        if (!jm.at("model").is_null()) mv.model = jm.at("model").get<std::string>();
        a.moves.push_back(std::move(mv));
    }
    if (!j.at("cost").is_null()) a.cost = j.at("cost").get<double>();
    return a;
}

// Two-row rendering: one column per move, >> marking the silent side.
inline std::string render_table(const Alignment& a) {
    std::vector<std::string> logs, models;
    for (const auto& mv : a.moves) {
        logs.push_back(mv.log ? *mv.log : ">>");
        models.push_back(mv.model ? *mv.model : ">>");
    }
    const auto row = [&](std::string label, const std::vector<std::string>& cells) {
        std::string line = std::move(label);
        line.resize(5, ' ');
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::size_t w = std::max(logs[i].size(), models[i].size());
            line += "  ";
            line += cells[i];
            line.append(w - cells[i].size(), ' ');
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        return line + "\n";
    };
    return row("LOG", logs) + row("MODEL", models) + "cost: " + detail::format_number(a.cost) +
           "\n";
}

namespace detail {

inline std::string render_align_output(const std::string& trace_id, const AlignResult& r,
                                       const std::string& format) {
    if (format == "json") return result_json(trace_id, r).dump(2) + "\n";
    if (!r.alignment)
        return std::string("no alignment: ") + (r.stats.timed_out ? "timeout" : "unsatisfiable") +
               "\n";
    return render_table(*r.alignment);
}

}  // namespace detail

inline int cmd_align(const AlignFlags& fl, std::ostream& out, std::ostream& err) {
    try {
        if (fl.format != "json" && fl.format != "table")
            throw CliError("--format must be json or table");
        const Model model = parse_model(detail::read_file(fl.model_path));
        const Log log = parse_log(detail::read_file(fl.log_path));
        CostFunction cf;
        if (!fl.costs_path.empty()) cf = parse_costs_csv(detail::read_file(fl.costs_path));
        const SearchConfig cfg =
            detail::make_config(fl.no_early_pruning, fl.no_chain_preprocessing,
                                fl.no_grouped_fixes, fl.timeout_seconds, cf);

        const bool dir_mode =
            !fl.out_path.empty() && std::filesystem::is_directory(fl.out_path);
        std::vector<std::size_t> picked;
        if (!fl.trace_id.empty()) {
            for (std::size_t i = 0; i < log.size(); ++i)
                if (trace_display_id(log[i], i) == fl.trace_id) {
                    picked.push_back(i);
                    break;
                }
            if (picked.empty()) throw CliError("unknown trace id: " + fl.trace_id);
        } else if (log.size() == 1) {
            picked.push_back(0);
        } else if (log.empty()) {
            throw CliError("log contains no traces");
        } else if (dir_mode) {
            for (std::size_t i = 0; i < log.size(); ++i) picked.push_back(i);
        } else {
            throw CliError("log has several traces: pass --trace ID, or --out DIRECTORY");
        }

        bool any_timeout = false, any_unsat = false;
        for (std::size_t i : picked) {
            const AlignResult r = align(log[i], model, cfg);
            any_timeout = any_timeout || r.outcome == AlignOutcome::Timeout;
            any_unsat = any_unsat || r.outcome == AlignOutcome::Unsatisfiable;
            const std::string id = trace_display_id(log[i], i);
            const std::string text = detail::render_align_output(id, r, fl.format);
            if (dir_mode) {
                const char* ext = fl.format == "json" ? ".json" : ".txt";
                detail::atomic_write_file(
                    std::filesystem::path(fl.out_path) / (detail::sanitize_filename(id) + ext),
                    text);
            } else if (!fl.out_path.empty()) {
                detail::atomic_write_file(fl.out_path, text);
            } else {
                out << text;
            }
        }
        return any_timeout ? kExitTimeout : any_unsat ? kExitUnsatisfiable : kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    }
}

inline int cmd_batch(const BatchFlags& fl, std::ostream&, std::ostream& err) {
    try {
        const Model model = parse_model(detail::read_file(fl.model_path));
        const Log log = parse_log(detail::read_file(fl.log_path));
        if (fl.jobs == 0) throw CliError("--jobs must be at least 1");
        const SearchConfig cfg =
            detail::make_config(fl.no_early_pruning, fl.no_chain_preprocessing,
                                fl.no_grouped_fixes, fl.timeout_seconds, CostFunction{});

        std::vector<AlignResult> results(log.size());
        std::atomic<std::size_t> next{0};
        const auto work = [&] {
            for (std::size_t i = next.fetch_add(1); i < log.size(); i = next.fetch_add(1))
                results[i] = align(log[i], model, cfg);
        };
        const std::size_t workers = std::min<std::size_t>(fl.jobs, std::max<std::size_t>(log.size(), 1));
        if (workers <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }

        std::ostringstream csv;
        csv << "trace_id,result,time_ms,expanded_states,discovered_states\n";
        double time_sum = 0.0;
        std::size_t completed = 0, timeouts = 0, unsat = 0;
        for (std::size_t i = 0; i < log.size(); ++i) {
            const AlignResult& r = results[i];
            std::string value;
            switch (r.outcome) {
                case AlignOutcome::Success:
                    value = detail::format_number(r.alignment->cost);
                    break;
                case AlignOutcome::Timeout:
                    value = "TIMEOUT";
                    ++timeouts;
                    break;
                case AlignOutcome::Unsatisfiable:
                    value = "UNSAT";
                    ++unsat;
                    break;
            }
            if (r.outcome != AlignOutcome::Timeout) {
                time_sum += r.stats.time_ms;
                ++completed;
            }
            csv << detail::csv_field(trace_display_id(log[i], i)) << ',' << value << ','
                << r.stats.time_ms << ',' << r.stats.expanded_states << ','
                << r.stats.discovered_states << "\n";
        }
        csv << "# summary: mean_time_ms=" << (completed ? time_sum / completed : 0.0)
            << " timeouts=" << timeouts << " unsat=" << unsat << "\n";
        detail::atomic_write_file(fl.metrics_path, csv.str());
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    }
}

// Random cross-check of the aligner against the brute-force reference:
// optimal costs must match, returned alignments must validate, the root
// heuristic may never exceed the certified optimum, and disabling any
// optimization must leave costs unchanged (and never reduce expansions
// for early pruning / grouped fixes).
inline int cmd_verify(const VerifyFlags& fl, std::ostream& out, std::ostream& err) {
    try {
        const CostFunction cf;
        const double timeout = detail::resolve_timeout(fl.timeout_seconds);
        std::size_t failures = 0, beyond = 0, inconclusive = 0;

        for (std::size_t i = 0; i < fl.instances; ++i) {
            InstanceSpec spec;
            spec.alphabet_size = fl.alphabet_size;
            spec.constraint_count = fl.constraint_count;
            spec.trace_length = fl.trace_length;
            spec.seed = fl.seed + i;
            const Instance inst = generate_instance(spec);
            const auto reference = brute_force_align(inst.trace, inst.model, fl.max_cost, cf);

            const auto fail = [&](const std::string& what) {
                ++failures;
                out << "instance " << i << " (seed " << spec.seed << "): " << what << "\n";
            };

            SearchConfig cfg;
            cfg.timeout_seconds = timeout;
            cfg.cost_function = cf;
            const AlignResult base = align(inst.trace, inst.model, cfg);
            if (base.outcome == AlignOutcome::Timeout) {
                ++inconclusive;
                continue;
            }
            if (base.alignment &&
                !validate_alignment(*base.alignment, inst.trace, inst.model, cf).ok())
                fail("returned alignment failed validation");

            if (reference) {
                if (base.outcome != AlignOutcome::Success)
                    fail("reference found cost " + detail::format_number(reference->cost) +
                         " but the aligner found none");
                else if (std::abs(base.alignment->cost - reference->cost) > 1e-6)
                    fail("cost mismatch: reference " + detail::format_number(reference->cost) +
                         " aligner " + detail::format_number(base.alignment->cost));
                LTGraph root = LTGraph::from_trace(inst.trace.activities);
                root = preprocess_chains(root, inst.model);
                const auto violated = violated_activations(root, inst.model);
                const HeuristicResult hr = heuristic(root, inst.model, violated, cf);
                if (hr.estimate > reference->cost + 1e-6)
                    fail("root heuristic " + detail::format_number(hr.estimate) +
                         " exceeds the optimal cost " + detail::format_number(reference->cost));
            } else {
                ++beyond;
                if (base.outcome == AlignOutcome::Success &&
                    base.alignment->cost <= fl.max_cost - 1e-6)
                    fail("aligner cost " + detail::format_number(base.alignment->cost) +
                         " within budget yet the reference found none");
            }

            const char* names[3] = {"early pruning", "chain preprocessing", "grouped fixes"};
            for (int t = 0; t < 3; ++t) {
                SearchConfig alt = cfg;
                (t == 0   ? alt.early_pruning
                 : t == 1 ? alt.chain_preprocessing
                          : alt.grouped_fixes) = false;
                const AlignResult r = align(inst.trace, inst.model, alt);
                if (r.outcome == AlignOutcome::Timeout) {
                    ++inconclusive;
                    continue;
                }
                if (r.outcome != base.outcome)
                    fail(std::string("outcome changed with ") + names[t] + " disabled");
                else if (base.alignment &&
                         std::abs(r.alignment->cost - base.alignment->cost) > 1e-6)
                    fail(std::string("cost changed with ") + names[t] + " disabled");
                else if (t != 1 && base.stats.expanded_states > r.stats.expanded_states)
                    fail(std::string(names[t]) + " expanded more states than its ablation");
            }
        }
        out << "verified " << fl.instances << " instances (seeds " << fl.seed << " through "
            << fl.seed + (fl.instances == 0 ? 0 : fl.instances - 1) << "): " << failures
            << " failures, " << beyond << " beyond-budget, " << inconclusive
            << " inconclusive\n";
        return failures == 0 ? kExitOk : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal trace alignment for DECLARE process models"};
    app.require_subcommand(1);

    AlignFlags af;
    CLI::App* a = app.add_subcommand("align", "align one trace, or a whole log into a directory");
    a->add_option("--model", af.model_path, "DECLARE model file")->required();
    a->add_option("--log", af.log_path, "event log (CSV or one trace per line)")->required();
    a->add_option("--trace", af.trace_id, "trace id to align (default: the log's only trace)");
    a->add_option("--timeout", af.timeout_seconds, "search timeout in seconds");
    a->add_option("--costs", af.costs_path, "per-activity move cost CSV");
    a->add_flag("--no-early-pruning", af.no_early_pruning, "disable early pruning");
    a->add_flag("--no-chain-preprocessing", af.no_chain_preprocessing,
                "disable chain preprocessing");
    a->add_flag("--no-grouped-fixes", af.no_grouped_fixes, "disable grouped fixes");
    a->add_option("--out", af.out_path, "output file, or directory for whole-log runs");
    a->add_option("--format", af.format, "json or table (default json)");

    BatchFlags bf;
    CLI::App* b = app.add_subcommand("batch", "align every trace and write a metrics CSV");
    b->add_option("--model", bf.model_path, "DECLARE model file")->required();
    b->add_option("--log", bf.log_path, "event log")->required();
    b->add_option("--metrics", bf.metrics_path, "metrics CSV output path")->required();
    b->add_option("--timeout", bf.timeout_seconds, "per-trace timeout in seconds");
    b->add_flag("--no-early-pruning", bf.no_early_pruning, "disable early pruning");
    b->add_flag("--no-chain-preprocessing", bf.no_chain_preprocessing,
                "disable chain preprocessing");
    b->add_flag("--no-grouped-fixes", bf.no_grouped_fixes, "disable grouped fixes");
    b->add_option("--jobs", bf.jobs, "worker threads (default 1)");

    VerifyFlags vf;
    CLI::App* v = app.add_subcommand("verify", "cross-check the aligner against brute force");
    v->add_option("--instances", vf.instances, "number of generated instances")->required();
    v->add_option("--seed", vf.seed, "seed of the first instance");
    v->add_option("--max-cost", vf.max_cost, "brute-force cost budget (default 6)");
    v->add_option("--alphabet-size", vf.alphabet_size, "alphabet size (default 4, max 8)");
    v->add_option("--constraint-count", vf.constraint_count, "constraints per model (default 3)");
    v->add_option("--trace-length", vf.trace_length, "trace length (default 6, max 10)");
    v->add_option("--timeout", vf.timeout_seconds, "per-run timeout in seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInputError;
    }

    if (a->parsed()) return cmd_align(af, out, err);
    if (b->parsed()) return cmd_batch(bf, out, err);
    return cmd_verify(vf, out, err);
}

}  // namespace declarealign
