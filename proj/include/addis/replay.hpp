#pragma once

// Replay of a recorded platform study: hypotheses with enrolment windows,
// conflicts from overlapping windows (shared concurrent controls), one pass of
// an engine, and the level left for hypotheses after the last one.
//
// Study file:
//   # comment
//   alpha = 0.05
//   tau = 0.8
//   lambda = 0.3
//   q = 0.6
//   T1 enter=0 exit=3 p=0.41
//   T2 enter=0 exit=3 p=NA          (NA marks a missing p-value)
//   ...
//   [conflicts]                     (optional; overrides the derived sets)
//   T4 = 1,2,3

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "addis/procedures.hpp"

namespace addis::replay {

struct StudyHypothesis {
    std::string label;
    double enter = 0.0;
    double exit = 0.0;
    std::optional<double> p;  // empty when recorded as NA
};

struct Study {
    double alpha = 0.05;
    double tau = 0.8;
    double lambda = 0.3;
    double q = 0.6;
    std::vector<StudyHypothesis> hypotheses;
    std::map<std::size_t, std::vector<std::size_t>> overrides;  // index -> explicit conflict set

    std::size_t size() const { return hypotheses.size(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

inline double number(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
}

inline std::size_t label_index(const std::string& s) {
    if (s.size() < 2 || s[0] != 'T') throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto v = std::stoul(s.substr(1), &used);
    if (used != s.size() - 1 || v == 0) throw std::invalid_argument(s);
    return v;
}

} // namespace detail

inline Study parse_study(std::istream& in) {
    Study st;
    bool in_conflicts = false;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) {
            std::ostringstream msg;
            msg << "line " << lineno << ": " << what;
            throw Error(Errc::ParseError, msg.str());
        };
        try {
            if (line == "[conflicts]") {
                in_conflicts = true;
                continue;
            }
            if (in_conflicts) {
                const auto eq = line.find('=');
                if (eq == std::string::npos) fail("expected T<i> = j,k,...");
                const std::size_t i = detail::label_index(detail::trim(line.substr(0, eq)));
                std::vector<std::size_t> set;
                std::stringstream ss(line.substr(eq + 1));
                for (std::string item; std::getline(ss, item, ',');) {
                    item = detail::trim(item);
                    if (item.empty()) continue;
                    set.push_back(item[0] == 'T' ? detail::label_index(item) : std::stoul(item));
                }
                st.overrides[i] = std::move(set);
                continue;
            }
            if (line[0] == 'T') {
                std::istringstream ls(line);
                StudyHypothesis h;
                ls >> h.label;
                if (detail::label_index(h.label) != st.hypotheses.size() + 1)
                    fail("expected T" + std::to_string(st.hypotheses.size() + 1) + ", got " + h.label);
                bool has_enter = false, has_exit = false, has_p = false;
                for (std::string tok; ls >> tok;) {
                    const auto eq = tok.find('=');
                    if (eq == std::string::npos) fail("expected key=value, got '" + tok + "'");
                    const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
                    if (key == "enter") h.enter = detail::number(val), has_enter = true;
                    else if (key == "exit") h.exit = detail::number(val), has_exit = true;
                    else if (key == "p") {
                        has_p = true;
                        if (val != "NA") {
                            h.p = detail::number(val);
                            if (!(*h.p >= 0.0 && *h.p <= 1.0)) fail("p-value outside [0,1]");
                        }
                    } else fail("unknown field '" + key + "'");
                }
                if (!has_enter || !has_exit || !has_p) fail("hypothesis lines need enter=, exit= and p=");
                if (h.exit < h.enter) fail("exit precedes enter");
                if (!st.hypotheses.empty() && h.enter < st.hypotheses.back().enter)
                    fail("hypotheses must be listed by nondecreasing entry time");
                st.hypotheses.push_back(std::move(h));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) fail("expected key = value");
            const auto key = detail::trim(line.substr(0, eq));
            const double v = detail::number(detail::trim(line.substr(eq + 1)));
            if (key == "alpha") st.alpha = v;
            else if (key == "tau") st.tau = v;
            else if (key == "lambda") st.lambda = v;
            else if (key == "q") st.q = v;
            else fail("unknown key '" + key + "'");
        } catch (const std::logic_error&) {
            fail("malformed entry '" + line + "'");
        }
    }
    for (const auto& [i, set] : st.overrides)
        if (i > st.size()) throw Error(Errc::ParseError, "conflict override for T" + std::to_string(i) + " without a hypothesis");
    return st;
}

/// X_i = {j < i : exit_j > enter_i} unless overridden.
inline ConflictStructure study_conflicts(const Study& st) {
    std::vector<std::vector<std::size_t>> sets(st.size());
    for (std::size_t i = 1; i <= st.size(); ++i) {
        if (auto o = st.overrides.find(i); o != st.overrides.end()) {
            sets[i - 1] = o->second;
            continue;
        }
        for (std::size_t j = 1; j < i; ++j)
            if (st.hypotheses[j - 1].exit > st.hypotheses[i - 1].enter) sets[i - 1].push_back(j);
    }
    return validate_conflicts(ConflictStructure::from_sets(std::move(sets)));
}

struct ReplayReport {
    std::string procedure;
    double q = 0.0;
    std::vector<double> levels;
    std::vector<bool> rejected;
    std::vector<std::vector<std::size_t>> conflicts;  // sets the engine was given
    std::size_t rejections = 0;
    double future_level = 0.0;  // +inf for the uncorrected reference
};

inline const std::vector<std::string>& replay_procedures() {
    static const std::vector<std::string> p{"graph-conf-u", "spending-local", "graph-conf", "closed-spending",
                                            "uncorrected"};
    return p;
}

/// Level still available to hypotheses after the last registered one when
/// every later hypothesis is tested with tau = 1, lambda = 0 and no conflicts.
inline double future_level(Engine& e) {
    if (auto* g = dynamic_cast<GraphConfEngine*>(&e)) return g->remaining_level();
    if (auto* s = dynamic_cast<SpendingLocalEngine*>(&e)) return s->remaining_level();
    if (auto* c = dynamic_cast<ClosedSpendingEngine*>(&e)) return c->remaining_level();
    if (auto* c = dynamic_cast<ClosedGraphEngine*>(&e)) return c->remaining_level();
    throw Error(Errc::InvalidConfig, "no future-level accounting for " + e.procedure());
}

/// Runs one procedure over the study with geometric gamma_i = q^i (1-q)/q.
/// Lag-form engines get the smallest enclosing lag form of the conflict sets.
inline ReplayReport replay_study(const Study& st, const std::string& procedure, std::optional<double> q = {}) {
    ReplayReport rep;
    rep.procedure = procedure;
    rep.q = q.value_or(st.q);
    if (st.hypotheses.empty()) throw Error(Errc::MissingData, "study lists no hypotheses");
    for (const auto& h : st.hypotheses)
        if (!h.p) throw Error(Errc::MissingData, h.label + " has no recorded p-value (p=NA); fill in the study file");
    if (procedure == "uncorrected") {
        for (const auto& h : st.hypotheses) {
            rep.levels.push_back(st.alpha);
            rep.rejected.push_back(*h.p <= st.alpha);
            rep.rejections += rep.rejected.back();
        }
        rep.future_level = std::numeric_limits<double>::infinity();
        return rep;
    }
    bool known = false;
    for (const auto& p : replay_procedures()) known |= p == procedure;
    if (!known) throw Error(Errc::InvalidConfig, "replay does not support '" + procedure + "'");

    auto conflicts = study_conflicts(st);
    if (procedure_info(procedure).lag_form_only) conflicts = lag_closure(conflicts);
    ProcedureSpec spec;
    spec.name = procedure;
    spec.defaults = EngineDefaults{st.alpha, st.tau, st.lambda, GammaSpec::geometric(rep.q)};
    auto engine = make_engine(spec);
    // every recorded p-value outside X_i is reported before alpha_i; by
    // monotonicity it stays outside all later conflict sets. Closed procedures
    // read the decisions inside X_i, so they see every earlier p-value.
    const bool sequential = procedure_info(procedure).reads_window_decisions;
    for (std::size_t i = 1; i <= st.size(); ++i) {
        const auto& set = conflicts.set(i);
        for (std::size_t j = 1; j < i; ++j)
            if (!engine->indicators(j) && (sequential || !std::binary_search(set.begin(), set.end(), j)))
                engine->observe(j, *st.hypotheses[j - 1].p);
        rep.conflicts.push_back(set);
        HypothesisSpec hs;
        hs.conflicts = set;
        rep.levels.push_back(engine->next(hs));
    }
    for (std::size_t j = 1; j <= st.size(); ++j)
        if (!engine->indicators(j)) engine->observe(j, *st.hypotheses[j - 1].p);
    engine->finish();
    for (std::size_t j = 1; j <= st.size(); ++j) {
        const bool r = engine->indicators(j)->R;
        rep.rejected.push_back(r);
        rep.rejections += r;
    }
    rep.future_level = future_level(*engine);
    return rep;
}

} // namespace addis::replay
