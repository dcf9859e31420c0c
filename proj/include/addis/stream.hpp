#pragma once

// Line protocol for live use of an engine.
//
//   H <id> [tau=<t>] [lambda=<l>] [conflicts=<j,k,...>]   ->  LEVEL <id> <alpha>
//   P <id> <p>                                           ->  DECISION <id> reject|accept S=<0|1> C=<0|1>
//   SNAPSHOT <path>                                      ->  OK snapshot <path>
//   QUIT
//
// Blank lines and lines starting with '#' are ignored. Failures answer
// `ERR <code> <detail>` and leave the session as it was before the line.
// Snapshots are versioned text holding the configuration and the accepted
// events with numbers in hexfloat, so a resumed session is bit-identical.

#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "addis/procedures.hpp"

namespace addis::stream {

inline constexpr const char* snapshot_magic = "addis-stream-snapshot";
inline constexpr int snapshot_version = 1;

struct StreamOptions {
    ProcedureSpec procedure;
    bool full_precision = false;  // %.17g instead of %.6g
};

namespace detail {

inline std::string hex(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", x);
    return buf;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::logic_error&) {
        throw Error(Errc::ParseError, "bad number '" + s + "'");
    }
    if (used != s.size()) throw Error(Errc::ParseError, "bad number '" + s + "'");
    return v;
}

inline std::size_t parse_index(const std::string& s) {
    if (s.empty() || s[0] == '-' || s[0] == '+') throw Error(Errc::ParseError, "bad index '" + s + "'");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::logic_error&) {
        throw Error(Errc::ParseError, "bad index '" + s + "'");
    }
    if (used != s.size()) throw Error(Errc::ParseError, "bad index '" + s + "'");
    return std::size_t(v);
}

inline std::string gamma_text(const GammaSpec& g) {
    switch (g.kind) {
    case GammaKind::Power: return "power:" + hex(g.param);
    case GammaKind::Geometric: return "geometric:" + hex(g.param);
    case GammaKind::Custom: throw Error(Errc::InvalidConfig, "custom gamma tables cannot be snapshotted");
    default: return g.id();
    }
}

} // namespace detail

class StreamSession {
public:
    explicit StreamSession(StreamOptions opts) : opts_(std::move(opts)), engine_(make_engine(opts_.procedure)) {}

    const Engine& engine() const { return *engine_; }
    const StreamOptions& options() const { return opts_; }
    bool finished() const { return quit_; }

    /// Handles one input line; returns the response (empty for comments).
    std::string handle(const std::string& raw) {
        std::string line = raw;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        std::istringstream in(line);
        std::string cmd;
        if (!(in >> cmd) || cmd[0] == '#') return {};
        try {
            if (cmd == "H") return on_register(in);
            if (cmd == "P") return on_report(in);
            if (cmd == "SNAPSHOT") return on_snapshot(in);
            if (cmd == "QUIT") {
                quit_ = true;
                return "BYE";
            }
            throw Error(Errc::ParseError, "unknown command '" + cmd + "'");
        } catch (const Error& e) {
            return "ERR " + std::string(errc_name(e.code())) + " " + e.detail();
        }
    }

    void run(std::istream& in, std::ostream& out) {
        for (std::string line; !quit_ && std::getline(in, line);) {
            const auto r = handle(line);
            if (!r.empty()) out << r << '\n' << std::flush;
        }
    }

    void write_snapshot(std::ostream& out) const {
        const auto& p = opts_.procedure;
        out << snapshot_magic << ' ' << snapshot_version << '\n';
        out << "procedure " << p.name << '\n';
        out << "alpha " << detail::hex(p.defaults.alpha) << '\n';
        out << "tau " << detail::hex(p.defaults.tau) << '\n';
        out << "lambda " << detail::hex(p.defaults.lambda) << '\n';
        out << "gamma " << detail::gamma_text(p.defaults.gamma) << '\n';
        out << "w0 " << (p.w0 ? detail::hex(*p.w0) : "none") << '\n';
        out << "rho " << detail::hex(p.rho) << '\n';
        out << "precision " << (opts_.full_precision ? "full" : "short") << '\n';
        out << "events " << log_.size() << '\n';
        for (const auto& e : log_) out << e << '\n';
        out << "end\n";
    }

    static StreamSession resume(std::istream& in) {
        auto next = [&](const char* key) {
            std::string line, k;
            if (!std::getline(in, line)) throw Error(Errc::ParseError, std::string("snapshot ends before '") + key + "'");
            std::istringstream ls(line);
            ls >> k;
            if (k != key) throw Error(Errc::ParseError, std::string("snapshot: expected '") + key + "', got '" + k + "'");
            std::string v;
            std::getline(ls >> std::ws, v);
            return v;
        };
        const auto version = next(snapshot_magic);
        if (version != std::to_string(snapshot_version))
            throw Error(Errc::ParseError, "unsupported snapshot version " + version);
        StreamOptions o;
        o.procedure.name = next("procedure");
        o.procedure.defaults.alpha = detail::parse_double(next("alpha"));
        o.procedure.defaults.tau = detail::parse_double(next("tau"));
        o.procedure.defaults.lambda = detail::parse_double(next("lambda"));
        o.procedure.defaults.gamma = GammaSpec::parse(next("gamma"));
        const auto w0 = next("w0");
        if (w0 != "none") o.procedure.w0 = detail::parse_double(w0);
        o.procedure.rho = detail::parse_double(next("rho"));
        o.full_precision = next("precision") == "full";
        const std::size_t count = detail::parse_index(next("events"));
        StreamSession s(o);
        for (std::size_t k = 0; k < count; ++k) {
            std::string line;
            if (!std::getline(in, line)) throw Error(Errc::ParseError, "snapshot truncated in event log");
            const auto r = s.handle(line);
            if (r.rfind("ERR", 0) == 0) throw Error(Errc::ParseError, "snapshot event rejected: " + r);
        }
        std::string tail;
        if (!std::getline(in, tail) || tail != "end") throw Error(Errc::ParseError, "snapshot missing 'end'");
        return s;
    }

private:
    std::string format(double x) const {
        char buf[40];
        std::snprintf(buf, sizeof buf, opts_.full_precision ? "%.17g" : "%.6g", x);
        return buf;
    }

    std::string on_register(std::istringstream& in) {
        std::string id_text;
        if (!(in >> id_text)) throw Error(Errc::ParseError, "H needs an index");
        const std::size_t id = detail::parse_index(id_text);
        HypothesisSpec spec;
        std::string canon = "H " + std::to_string(id);
        for (std::string tok; in >> tok;) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw Error(Errc::ParseError, "expected key=value, got '" + tok + "'");
            const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "tau") {
                spec.tau = detail::parse_double(val);
                canon += " tau=" + detail::hex(*spec.tau);
            } else if (key == "lambda") {
                spec.lambda = detail::parse_double(val);
                canon += " lambda=" + detail::hex(*spec.lambda);
            } else if (key == "conflicts") {
                std::stringstream ss(val);
                for (std::string item; std::getline(ss, item, ',');)
                    if (!item.empty()) spec.conflicts.push_back(detail::parse_index(item));
                canon += " conflicts=" + val;
            } else {
                throw Error(Errc::ParseError, "unknown field '" + key + "'");
            }
        }
        if (id != engine_->registered() + 1) {
            std::ostringstream msg;
            msg << "registration out of order: expected H" << engine_->registered() + 1 << ", got H" << id;
            throw Error(Errc::UnknownIndex, msg.str());
        }
        double level;
        try {
            level = engine_->next(spec);
        } catch (const Error&) {
            rebuild();  // registration may have succeeded before the level failed
            throw;
        }
        log_.push_back(canon);
        return "LEVEL " + std::to_string(id) + " " + format(level);
    }

    std::string on_report(std::istringstream& in) {
        std::string id_text, p_text, extra;
        if (!(in >> id_text >> p_text)) throw Error(Errc::ParseError, "P needs an index and a p-value");
        if (in >> extra) throw Error(Errc::ParseError, "trailing input after p-value");
        const std::size_t id = detail::parse_index(id_text);
        const double p = detail::parse_double(p_text);
        if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::DomainError, "p-value outside [0,1]");
        const auto d = engine_->observe(id, p);
        log_.push_back("P " + std::to_string(id) + " " + detail::hex(p));
        return "DECISION " + std::to_string(id) + (d.reject() ? " reject" : " accept") + " S=" +
               (d.indicators.S ? "1" : "0") + " C=" + (d.indicators.C ? "1" : "0");
    }

    std::string on_snapshot(std::istringstream& in) {
        std::string path;
        if (!(in >> path)) throw Error(Errc::ParseError, "SNAPSHOT needs a path");
        std::ofstream out(path);
        if (!out) throw Error(Errc::InvalidConfig, "cannot write snapshot to " + path);
        write_snapshot(out);
        if (!out) throw Error(Errc::InvalidConfig, "failed writing snapshot to " + path);
        return "OK snapshot " + path;
    }

    /// Rebuilds the engine from the accepted events.
    void rebuild() {
        auto log = std::move(log_);
        log_.clear();
        engine_ = make_engine(opts_.procedure);
        for (const auto& e : log) handle(e);
    }

    StreamOptions opts_;
    std::unique_ptr<Engine> engine_;
    std::vector<std::string> log_;
    bool quit_ = false;
};

} // namespace addis::stream
