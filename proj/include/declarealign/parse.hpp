#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "model.hpp"

namespace declarealign {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline std::string trim(std::string_view sv) {
    std::size_t b = 0, e = sv.size();
    while (b < e && std::isspace(static_cast<unsigned char>(sv[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(sv[e - 1]))) --e;
    return std::string(sv.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view sv, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= sv.size(); ++i) {
        if (i == sv.size() || sv[i] == sep) {
            out.emplace_back(sv.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            std::string_view line = text.substr(start, i - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            out.emplace_back(line);
            start = i + 1;
        }
    }
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

inline bool is_integer(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

inline Activity checked_activity(const std::string& raw, std::size_t line) {
    std::string name = trim(raw);
    if (!is_valid_activity_name(name))
        throw ParseError(line, "invalid activity name '" + name + "'");
    return name;
}

// ISO-8601 timestamp -> monotone sort key (microseconds since civil epoch, UTC).
// Accepts YYYY-MM-DD[<T or space>HH:MM[:SS[.frac]][Z|+hh:mm|-hh:mm]].
inline std::int64_t parse_timestamp(const std::string& raw, std::size_t line) {
    const std::string s = trim(raw);
    std::size_t pos = 0;
    auto take_int = [&](std::size_t digits) -> std::int64_t {
        if (pos + digits > s.size()) throw ParseError(line, "unparsable timestamp '" + s + "'");
        std::int64_t v = 0;
        for (std::size_t i = 0; i < digits; ++i) {
            char c = s[pos + i];
            if (!std::isdigit(static_cast<unsigned char>(c)))
                throw ParseError(line, "unparsable timestamp '" + s + "'");
            v = v * 10 + (c - '0');
        }
        pos += digits;
        return v;
    };
    auto expect = [&](char c) {
        if (pos >= s.size() || s[pos] != c)
            throw ParseError(line, "unparsable timestamp '" + s + "'");
        ++pos;
    };

    const std::int64_t year = take_int(4);
    expect('-');
    const std::int64_t month = take_int(2);
    expect('-');
    const std::int64_t day = take_int(2);
    if (month < 1 || month > 12 || day < 1 || day > 31)
        throw ParseError(line, "unparsable timestamp '" + s + "'");

    // days-from-civil (Gregorian), standard era-based computation
    const std::int64_t y = year - (month <= 2 ? 1 : 0);
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const std::int64_t yoe = y - era * 400;
    const std::int64_t doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    const std::int64_t days = era * 146097 + doe - 719468;

    std::int64_t hh = 0, mm = 0, ss = 0, micros = 0, tz_offset_min = 0;
    if (pos < s.size()) {
        if (s[pos] != 'T' && s[pos] != ' ')
            throw ParseError(line, "unparsable timestamp '" + s + "'");
        ++pos;
        hh = take_int(2);
        expect(':');
        mm = take_int(2);
        if (pos < s.size() && s[pos] == ':') {
            ++pos;
            ss = take_int(2);
        }
        if (pos < s.size() && s[pos] == '.') {
            ++pos;
            std::int64_t scale = 100000;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
                micros += (s[pos] - '0') * scale;
                scale /= 10;
                ++pos;
            }
        }
        if (pos < s.size()) {
            if (s[pos] == 'Z') {
                ++pos;
            } else if (s[pos] == '+' || s[pos] == '-') {
                const bool neg = s[pos] == '-';
                ++pos;
                const std::int64_t oh = take_int(2);
                std::int64_t om = 0;
                if (pos < s.size() && s[pos] == ':') {
                    ++pos;
                    om = take_int(2);
                }
                tz_offset_min = (neg ? -1 : 1) * (oh * 60 + om);
            }
        }
        if (hh > 23 || mm > 59 || ss > 60)
            throw ParseError(line, "unparsable timestamp '" + s + "'");
    }
    if (pos != s.size()) throw ParseError(line, "unparsable timestamp '" + s + "'");

    const std::int64_t seconds = days * 86400 + hh * 3600 + mm * 60 + ss - tz_offset_min * 60;
    return seconds * 1000000 + micros;
}

}  // namespace detail

// Text form: one constraint per line, `Template(arg, ...)`; counted templates
// take a leading integer, parameters are activities or bracketed branch sets;
// `#` starts a comment.
inline Model parse_model(std::string_view text) {
    Model model;
    const auto lines = detail::lines_of(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::size_t line_no = li + 1;
        std::string line = lines[li];
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        const auto open = line.find('(');
        if (open == std::string::npos || line.back() != ')')
            throw ParseError(line_no, "expected Template(...)");
        const std::string name = detail::trim(line.substr(0, open));
        const auto kind = template_kind_from_name(name);
        if (!kind) throw ParseError(line_no, "unknown template '" + name + "'");
        const TemplateTraits& t = traits(*kind);

        // split the argument list on top-level commas only
        std::string body = line.substr(open + 1, line.size() - open - 2);
        std::vector<std::string> args;
        int depth = 0;
        std::string current;
        for (char c : body) {
            if (c == '[') ++depth;
            if (c == ']') --depth;
            if (depth < 0) throw ParseError(line_no, "unbalanced ']'");
            if (c == ',' && depth == 0) {
                args.push_back(current);
                current.clear();
            } else {
                current += c;
            }
        }
        if (depth != 0) throw ParseError(line_no, "unbalanced '['");
        args.push_back(current);
        if (args.size() == 1 && detail::trim(args[0]).empty())
            throw ParseError(line_no, std::string(t.name) + ": missing parameters");

        int n = 0;
        std::size_t first_param = 0;
        if (t.counted) {
            const std::string ns = detail::trim(args[0]);
            if (!detail::is_integer(ns))
                throw ParseError(line_no,
                                 std::string(t.name) + ": first argument must be an integer");
            n = std::stoi(ns);
            if (n < 1) throw ParseError(line_no, std::string(t.name) + ": count must be >= 1");
            first_param = 1;
        }

        std::vector<BranchSet> params;
        for (std::size_t i = first_param; i < args.size(); ++i) {
            std::string a = detail::trim(args[i]);
            if (a.empty()) throw ParseError(line_no, "empty parameter");
            if (a.front() == '[') {
                if (a.back() != ']') throw ParseError(line_no, "unbalanced '['");
                std::vector<Activity> members;
                for (const auto& part : detail::split(a.substr(1, a.size() - 2), ','))
                    members.push_back(detail::checked_activity(part, line_no));
                if (members.empty()) throw ParseError(line_no, "empty branch set");
                params.emplace_back(std::move(members));
            } else {
                if (detail::is_integer(a))
                    throw ParseError(line_no, "unexpected integer argument");
                params.emplace_back(std::vector<Activity>{detail::checked_activity(a, line_no)});
            }
        }
        if (static_cast<int>(params.size()) != t.arity)
            throw ParseError(line_no, std::string(t.name) + ": expected " +
                                          std::to_string(t.arity) + " parameter(s), got " +
                                          std::to_string(params.size()));
        model.add_constraint(make_constraint(*kind, std::move(params), n));
    }
    return model;
}

inline std::string serialize_constraint(const Constraint& c) {
    std::ostringstream os;
    os << traits(c.kind).name << '(';
    if (traits(c.kind).counted) os << c.n << ", ";
    for (std::size_t p = 0; p < c.params.size(); ++p) {
        if (p > 0) os << ", ";
        const auto& members = c.params[p].members();
        if (members.size() == 1) {
            os << members[0];
        } else {
            os << '[';
            for (std::size_t i = 0; i < members.size(); ++i) {
                if (i > 0) os << ", ";
                os << members[i];
            }
            os << ']';
        }
    }
    os << ')';
    return os.str();
}

inline std::string serialize_model(const Model& m) {
    std::string out;
    for (const auto& c : m.constraints()) {
        out += serialize_constraint(c);
        out += '\n';
    }
    return out;
}

// Event-log input. Two formats:
//  - CSV with header trace_id,activity,timestamp; events of a trace are sorted
//    by timestamp when every event has one (stable, so ties keep file order),
//    otherwise file order is kept;
//  - plain text, one trace per line: `id;A,B,C` or just `A,B,C`.
inline Log parse_log(std::string_view text) {
    const auto lines = detail::lines_of(text);

    std::size_t first = 0;
    while (first < lines.size()) {
        const std::string t = detail::trim(lines[first]);
        if (t.empty() || t.front() == '#') {
            ++first;
            continue;
        }
        break;
    }
    if (first == lines.size()) return {};

    const auto header_fields = detail::split(lines[first], ',');
    const bool is_csv = header_fields.size() == 3 &&
                        detail::trim(header_fields[0]) == "trace_id" &&
                        detail::trim(header_fields[1]) == "activity" &&
                        detail::trim(header_fields[2]) == "timestamp";

    Log log;
    if (is_csv) {
        struct Event {
            Activity activity;
            std::optional<std::int64_t> timestamp;
            std::size_t file_index;
        };
        std::map<std::string, std::vector<Event>> by_trace;
        std::vector<std::string> order;
        std::size_t file_index = 0;
        for (std::size_t li = first + 1; li < lines.size(); ++li) {
            const std::size_t line_no = li + 1;
            const std::string line = detail::trim(lines[li]);
            if (line.empty() || line.front() == '#') continue;
            const auto fields = detail::split(line, ',');
            if (fields.size() != 3)
                throw ParseError(line_no, "expected trace_id,activity,timestamp");
            const std::string id = detail::trim(fields[0]);
            if (id.empty()) throw ParseError(line_no, "empty trace_id");
            const Activity act = detail::checked_activity(fields[1], line_no);
            const std::string ts = detail::trim(fields[2]);
            std::optional<std::int64_t> key;
            if (!ts.empty()) key = detail::parse_timestamp(ts, line_no);
            if (!by_trace.count(id)) order.push_back(id);
            by_trace[id].push_back({act, key, file_index++});
        }
        for (const auto& id : order) {
            auto& events = by_trace[id];
            const bool all_timed = std::all_of(events.begin(), events.end(),
                                               [](const Event& e) { return e.timestamp.has_value(); });
            if (all_timed)
                std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
                    return *a.timestamp < *b.timestamp;
                });
            Trace trace;
            trace.id = id;
            for (const auto& e : events) trace.activities.push_back(e.activity);
            log.push_back(std::move(trace));
        }
    } else {
        for (std::size_t li = first; li < lines.size(); ++li) {
            const std::size_t line_no = li + 1;
            const std::string line = detail::trim(lines[li]);
            if (line.empty() || line.front() == '#') continue;
            Trace trace;
            std::string acts = line;
            if (auto semi = line.find(';'); semi != std::string::npos) {
                const std::string id = detail::trim(line.substr(0, semi));
                if (!id.empty()) trace.id = id;
                acts = detail::trim(line.substr(semi + 1));
            }
            if (!acts.empty())
                for (const auto& part : detail::split(acts, ','))
                    trace.activities.push_back(detail::checked_activity(part, line_no));
            log.push_back(std::move(trace));
        }
    }
    return log;
}

// Display identifier for a trace: its declared id, or its 1-based position.
inline std::string trace_display_id(const Trace& t, std::size_t index) {
    return t.id ? *t.id : std::to_string(index + 1);
}

}  // namespace declarealign
