#pragma once

// Batch-Gaussian simulation: equicorrelated z-statistics per batch, one-sided
// p-values, a strictly ordered feed into an engine, and Monte Carlo metrics
// over many trials.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <istream>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "addis/normal.hpp"
#include "addis/procedures.hpp"

namespace addis::sim {

struct DataConfig {
    std::size_t n = 100;
    std::size_t b = 1;
    double rho = 0.5;
    double pi_a = 0.3;
    double mu_n = 0.0;
    double alt_shift = 3.0;
    std::size_t e = 0;  // test duration: H_i conflicts with the e previous hypotheses

    void validate() const {
        std::ostringstream msg;
        if (n == 0 || b == 0 || n % b != 0) msg << "n = " << n << " must be a positive multiple of b = " << b;
        else if (!(rho > 0.0 && rho < 1.0)) msg << "rho = " << rho << " must lie in (0,1)";
        else if (!(pi_a > 0.0 && pi_a < 1.0)) msg << "pi_A = " << pi_a << " must lie in (0,1)";
        else if (!(mu_n <= 0.0)) msg << "mu_N = " << mu_n << " must be <= 0";
        else if (!std::isfinite(alt_shift)) msg << "alternative shift must be finite";
        else return;
        throw Error(Errc::InvalidConfig, msg.str());
    }

    std::vector<std::size_t> lags() const { return ConflictStructure::batched_delay_lags(n, b, e); }
};

/// Per-trial stream: mt19937_64 seeded with seed_seq{seed lo, seed hi, trial
/// lo, trial hi, 0x5eed}. Uniforms use the top 53 bits, ((x >> 11) + 0.5) / 2^53,
/// so they never hit 0 or 1; normals are normal_quantile of a uniform.
class TrialRng {
public:
    TrialRng(std::uint64_t seed, std::uint64_t trial) {
        std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(trial),
                          std::uint32_t(trial >> 32), std::uint32_t(0x5eed)};
        eng_.seed(seq);
    }
    double uniform() { return (double(eng_() >> 11) + 0.5) * 0x1p-53; }
    double normal() { return normal_quantile(uniform()); }

private:
    std::mt19937_64 eng_;
};

struct TrialData {
    std::vector<double> p;
    std::vector<char> alternative;
    std::size_t alternatives() const { return std::size_t(std::count(alternative.begin(), alternative.end(), 1)); }
};

/// Per batch: Z0, then for each member eps and the label uniform.
/// X = sqrt(rho) Z0 + sqrt(1-rho) eps; Z = X + shift (alternative) or X + mu_N.
inline TrialData generate_trial(const DataConfig& cfg, std::uint64_t seed, std::uint64_t trial) {
    cfg.validate();
    TrialRng rng(seed, trial);
    TrialData d;
    d.p.reserve(cfg.n);
    d.alternative.reserve(cfg.n);
    const double a = std::sqrt(cfg.rho), c = std::sqrt(1.0 - cfg.rho);
    for (std::size_t batch = 0; batch < cfg.n / cfg.b; ++batch) {
        const double z0 = rng.normal();
        for (std::size_t k = 0; k < cfg.b; ++k) {
            const double x = a * z0 + c * rng.normal();
            const bool alt = rng.uniform() < cfg.pi_a;
            d.p.push_back(normal_sf(x + (alt ? cfg.alt_shift : cfg.mu_n)));
            d.alternative.push_back(alt ? 1 : 0);
        }
    }
    return d;
}

struct TrialOutcome {
    std::vector<double> levels;
    std::vector<char> rejected;
    std::size_t V = 0;  // false rejections
    std::size_t R = 0;
    std::size_t alternatives = 0;
    std::size_t true_rejections = 0;
    std::optional<ConditionReport> condition;
    std::vector<double> alpha_c;  // filled by engines that track in-batch joint levels
};

/// Before alpha_i is requested, every p-value outside X_i is reported; the
/// rest are reported once all levels are out. The engine therefore sees
/// exactly the information its conflict sets allow. With `sequential` set,
/// every earlier p-value is reported first (closed procedures, whose conflict
/// sets describe dependence only).
inline TrialOutcome run_procedure(Engine& engine, const TrialData& data, std::span<const std::size_t> lags,
                                  std::optional<ErrorCriterion> check = std::nullopt, bool sequential = false) {
    const std::size_t n = data.p.size();
    if (lags.size() != n) throw Error(Errc::InvalidConfig, "lag vector length differs from trial length");
    TrialOutcome out;
    out.levels.resize(n);
    out.rejected.assign(n, 0);
    std::size_t reported = 0;
    auto report = [&](std::size_t j) {
        out.rejected[j - 1] = engine.observe(j, data.p[j - 1]).reject() ? 1 : 0;
    };
    HypothesisSpec spec;
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t left = sequential ? i : i - lags[i - 1];
        while (reported + 1 < left) report(++reported);
        spec.conflicts.clear();
        for (std::size_t j = left; j < i; ++j) spec.conflicts.push_back(j);
        out.levels[i - 1] = engine.next(spec);
    }
    while (reported < n) report(++reported);
    engine.finish();
    if (const auto* corr = dynamic_cast<const AdaptiveGraphCorrEngine*>(&engine))
        for (std::size_t i = 1; i <= n; ++i)
            out.alpha_c.push_back(corr->alpha_c(i).value_or(std::numeric_limits<double>::quiet_NaN()));
    for (std::size_t i = 0; i < n; ++i) {
        const bool alt = data.alternative[i] != 0;
        out.alternatives += alt;
        if (out.rejected[i]) {
            ++out.R;
            alt ? ++out.true_rejections : ++out.V;
        }
    }
    if (check) out.condition = check_condition(engine, *check);
    return out;
}

inline TrialOutcome run_procedure(const ProcedureSpec& proc, const TrialData& data, std::span<const std::size_t> lags,
                                  bool check_budget = false) {
    auto engine = make_engine(proc);
    const auto& info = procedure_info(proc.name);
    std::optional<ErrorCriterion> c;
    if (check_budget) c = info.criterion;
    return run_procedure(*engine, data, lags, c, info.reads_window_decisions);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Neumaier-compensated running sum; adding in a fixed order gives the same
/// total regardless of how the terms were produced.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
        else comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct TrialSummary {
    std::size_t V = 0;
    std::size_t R = 0;
    std::size_t alternatives = 0;
    std::size_t true_rejections = 0;
};

inline TrialSummary summarize(const TrialOutcome& o) { return {o.V, o.R, o.alternatives, o.true_rejections}; }

struct Metrics {
    std::size_t trials = 0;
    double fwer = 0.0, fwer_se = 0.0;
    double pfer = 0.0, pfer_se = 0.0;
    double power = std::numeric_limits<double>::quiet_NaN(), power_se = std::numeric_limits<double>::quiet_NaN();
    std::size_t power_trials = 0;  // trials with at least one alternative
    double fdr = 0.0, fdr_se = 0.0;
    double mfdr = 0.0;
};

namespace detail {

struct MeanSe {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    if (xs.empty()) return r;
    CompensatedSum s;
    for (double x : xs) s.add(x);
    r.mean = s.value() / double(xs.size());
    if (xs.size() < 2) {
        r.se = 0.0;
        return r;
    }
    CompensatedSum ss;
    for (double x : xs) ss.add((x - r.mean) * (x - r.mean));
    r.se = std::sqrt(ss.value() / double(xs.size() - 1) / double(xs.size()));
    return r;
}

} // namespace detail

/// FWER with binomial SE, the rest with sample-sd / sqrt(count). Trials
/// without alternatives are left out of the power average.
inline Metrics compute_metrics(std::span<const TrialSummary> trials) {
    if (trials.empty()) throw Error(Errc::EmptyOutcomeSet, "metrics need at least one trial");
    Metrics m;
    m.trials = trials.size();
    const double T = double(trials.size());
    std::vector<double> v, fdp, pw;
    v.reserve(trials.size());
    fdp.reserve(trials.size());
    CompensatedSum any, rden;
    for (const auto& t : trials) {
        if (t.V > t.R || t.true_rejections > t.alternatives || t.V + t.true_rejections != t.R)
            throw Error(Errc::InvalidConfig, "inconsistent trial counts");
        any.add(t.V > 0 ? 1.0 : 0.0);
        v.push_back(double(t.V));
        const double r1 = double(std::max<std::size_t>(t.R, 1));
        fdp.push_back(double(t.V) / r1);
        rden.add(r1);
        if (t.alternatives > 0) pw.push_back(double(t.true_rejections) / double(t.alternatives));
    }
    m.fwer = any.value() / T;
    m.fwer_se = std::sqrt(m.fwer * (1.0 - m.fwer) / T);
    const auto pf = detail::mean_se(v);
    m.pfer = pf.mean;
    m.pfer_se = pf.se;
    const auto fd = detail::mean_se(fdp);
    m.fdr = fd.mean;
    m.fdr_se = fd.se;
    m.power_trials = pw.size();
    if (!pw.empty()) {
        const auto p = detail::mean_se(pw);
        m.power = p.mean;
        m.power_se = p.se;
    }
    m.mfdr = m.pfer / (rden.value() / T);
    return m;
}

// ---------------------------------------------------------------------------
// Trial fan-out
// ---------------------------------------------------------------------------

/// Calls fn(t) for t in [0, count) on up to `threads` workers. Results are
/// written by index, so output does not depend on scheduling. The first
/// exception (lowest trial index) is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, unsigned(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t t = 0; t < count; ++t) fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    std::size_t err_at = count;
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < count;) {
            try {
                fn(t);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (t < err_at) {
                    err_at = t;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

struct GridSpec {
    std::vector<std::string> procedures{"spending-local", "graph-conf-u"};
    std::vector<GammaSpec> gammas{GammaSpec::basel()};
    std::vector<std::size_t> ns{100};
    std::vector<std::size_t> bs{1};
    std::vector<double> rhos{0.5};
    std::vector<double> mus{0.0};
    std::vector<std::size_t> es{0};
    std::vector<double> pis{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    std::optional<double> alpha, tau, lambda, w0;
    double alt_shift = 3.0;
    unsigned threads = 1;
    bool check = false;  // run the budget-condition checker on every trajectory
};

struct GridPoint {
    std::string procedure;
    GammaSpec gamma;
    DataConfig data;
};

struct GridRow {
    GridPoint point;
    EngineDefaults defaults;
    Metrics metrics;
    std::size_t condition_failures = 0;
    double worst_excess = -std::numeric_limits<double>::infinity();
};

/// Cartesian product in the order gamma, b, rho, mu_N, e, pi_A, n, with the
/// procedure varying fastest.
inline std::vector<GridPoint> expand_grid(const GridSpec& g) {
    std::vector<GridPoint> pts;
    for (const auto& gamma : g.gammas)
        for (auto b : g.bs)
            for (auto rho : g.rhos)
                for (auto mu : g.mus)
                    for (auto e : g.es)
                        for (auto pi : g.pis)
                            for (auto n : g.ns)
                                for (const auto& proc : g.procedures) {
                                    GridPoint p{proc, gamma, DataConfig{n, b, rho, pi, mu, g.alt_shift, e}};
                                    pts.push_back(std::move(p));
                                }
    return pts;
}

inline ProcedureSpec procedure_for(const GridSpec& g, const GridPoint& pt) {
    ProcedureSpec s;
    s.name = pt.procedure;
    s.defaults = resolve_defaults(pt.procedure, g.alpha, g.tau, g.lambda, pt.gamma);
    s.w0 = g.w0;
    s.rho = pt.data.rho;
    return s;
}

/// Optional sink for per-trajectory records (levels and decisions).
using TrajectorySink = std::function<void(const GridPoint&, std::size_t trial, const TrialData&, const TrialOutcome&)>;

inline std::string describe(const GridPoint& pt) {
    std::ostringstream os;
    os << pt.procedure << " gamma=" << pt.gamma.id() << " n=" << pt.data.n << " b=" << pt.data.b
       << " rho=" << pt.data.rho << " pi_A=" << pt.data.pi_a << " mu_N=" << pt.data.mu_n << " e=" << pt.data.e;
    return os.str();
}

/// Runs every grid point. Points sharing data settings reuse the same trial
/// streams (seed, trial index), so procedures are compared on common data.
inline std::vector<GridRow> run_grid(const GridSpec& g, const TrajectorySink& sink = {},
                                     const std::function<void(const GridRow&)>& progress = {}) {
    if (g.trials == 0) throw Error(Errc::EmptyOutcomeSet, "trials must be positive");
    for (const auto& p : g.procedures) procedure_info(p);
    std::vector<GridRow> rows;
    for (const auto& pt : expand_grid(g)) {
        GridRow row;
        row.point = pt;
        try {
            pt.data.validate();
            const auto proc = procedure_for(g, pt);
            row.defaults = proc.defaults;
            const auto& info = procedure_info(pt.procedure);
            if ((info.batch_form_only || info.reads_window_decisions) && pt.data.e != 0)
                throw Error(Errc::InvalidConfig, pt.procedure + " needs pure batch dependence (e = 0)");
            const auto lags = pt.data.lags();
            std::vector<TrialSummary> sums(g.trials);
            std::vector<std::optional<ConditionReport>> reps(g.trials);
            // kept only when dumping, so the sink sees trials in index order
            std::vector<std::pair<TrialData, TrialOutcome>> kept(sink ? g.trials : 0);
            parallel_for(g.trials, g.threads, [&](std::size_t t) {
                auto data = generate_trial(pt.data, g.seed, t);
                auto out = run_procedure(proc, data, lags, g.check);
                sums[t] = summarize(out);
                reps[t] = out.condition;
                if (sink) kept[t] = {std::move(data), std::move(out)};
            });
            for (std::size_t t = 0; t < kept.size(); ++t) sink(pt, t, kept[t].first, kept[t].second);
            row.metrics = compute_metrics(sums);
            for (const auto& r : reps) {
                if (!r) continue;
                row.worst_excess = std::max(row.worst_excess, r->worst_excess);
                if (!r->pass) ++row.condition_failures;
            }
        } catch (const Error& e) {
            throw Error(e.code(), describe(pt) + ": " + e.detail());
        }
        if (progress) progress(row);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Grid config files: `key = value` lines, comma-separated lists, `#` comments.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double to_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
}

inline std::uint64_t to_uint(const std::string& s) {
    if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
}

} // namespace detail

inline const std::vector<std::string>& grid_keys() {
    static const std::vector<std::string> keys{"procedures", "gamma", "n",     "b",      "rho",  "mu_N",
                                               "e",          "pi_A",  "trials", "seed",  "alpha", "tau",
                                               "lambda",     "w0",    "threads", "alt_shift", "check"};
    return keys;
}

inline GridSpec parse_grid(std::istream& in) {
    GridSpec g;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) {
            std::ostringstream msg;
            msg << "line " << lineno << ": " << what;
            throw Error(Errc::ParseError, msg.str());
        };
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        const auto items = detail::split_list(val);
        if (items.empty()) fail("empty value for '" + key + "'");
        auto scalar = [&]() -> const std::string& {
            if (items.size() != 1) fail("'" + key + "' takes a single value");
            return items[0];
        };
        try {
            auto doubles = [&] {
                std::vector<double> v;
                for (const auto& s : items) v.push_back(detail::to_double(s));
                return v;
            };
            auto sizes = [&] {
                std::vector<std::size_t> v;
                for (const auto& s : items) v.push_back(std::size_t(detail::to_uint(s)));
                return v;
            };
            if (key == "procedures") {
                for (const auto& s : items) procedure_info(s);
                g.procedures = items;
            } else if (key == "gamma") {
                g.gammas.clear();
                for (const auto& s : items) g.gammas.push_back(GammaSpec::parse(s));
            } else if (key == "n") g.ns = sizes();
            else if (key == "b") g.bs = sizes();
            else if (key == "e") g.es = sizes();
            else if (key == "rho") g.rhos = doubles();
            else if (key == "mu_N") g.mus = doubles();
            else if (key == "pi_A") g.pis = doubles();
            else if (key == "trials") g.trials = std::size_t(detail::to_uint(scalar()));
            else if (key == "seed") g.seed = detail::to_uint(scalar());
            else if (key == "threads") g.threads = unsigned(detail::to_uint(scalar()));
            else if (key == "alpha") g.alpha = detail::to_double(scalar());
            else if (key == "tau") g.tau = detail::to_double(scalar());
            else if (key == "lambda") g.lambda = detail::to_double(scalar());
            else if (key == "w0") g.w0 = detail::to_double(scalar());
            else if (key == "alt_shift") g.alt_shift = detail::to_double(scalar());
            else if (key == "check") {
                const auto& s = scalar();
                if (s == "true" || s == "1") g.check = true;
                else if (s == "false" || s == "0") g.check = false;
                else fail("check must be true or false");
            } else fail("unknown key '" + key + "'");
        } catch (const Error& e) {
            if (e.code() == Errc::ParseError) throw;
            fail(e.detail());
        } catch (const std::logic_error&) {
            fail("bad value '" + val + "' for '" + key + "'");
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char* csv_header =
    "procedure,gamma_id,n,b,rho,pi_A,mu_N,e,trials,fwer,fwer_se,pfer,power,power_se,fdr,fdr_se,mfdr";

inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline void write_csv(std::ostream& out, const GridSpec& g, const std::vector<GridRow>& rows) {
    out << "# addis simulate csv v1\n";
    out << "# seed=" << g.seed << " trials=" << g.trials << " alt_shift=" << format_number(g.alt_shift) << "\n";
    out << "# power averages only trials with at least one alternative; nan when no trial had one\n";
    out << "# p-value stream: mt19937_64 per (seed, trial), common across procedures at a grid point\n";
    out << csv_header << "\n";
    for (const auto& r : rows) {
        const auto& d = r.point.data;
        const auto& m = r.metrics;
        out << r.point.procedure << ',' << r.point.gamma.id() << ',' << d.n << ',' << d.b << ','
            << format_number(d.rho) << ',' << format_number(d.pi_a) << ',' << format_number(d.mu_n) << ',' << d.e
            << ',' << m.trials << ',' << format_number(m.fwer) << ',' << format_number(m.fwer_se) << ','
            << format_number(m.pfer) << ',' << format_number(m.power) << ',' << format_number(m.power_se) << ','
            << format_number(m.fdr) << ',' << format_number(m.fdr_se) << ',' << format_number(m.mfdr) << "\n";
    }
}

/// One line per hypothesis: trial, index, truth, p, level, decision; the
/// grid point is echoed in a `#` line whenever it changes.
class TrajectoryWriter {
public:
    explicit TrajectoryWriter(std::ostream& out) : out_(out) { out_ << "trial,index,alternative,p,level,reject\n"; }

    void operator()(const GridPoint& pt, std::size_t trial, const TrialData& d, const TrialOutcome& o) {
        const auto head = describe(pt);
        if (head != last_) out_ << "# " << (last_ = head) << "\n";
        char buf[96];
        for (std::size_t i = 0; i < d.p.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%d,%.17g,%.17g,%d\n", trial, i + 1, int(d.alternative[i]), d.p[i],
                          o.levels[i], int(o.rejected[i]));
            out_ << buf;
        }
    }

private:
    std::ostream& out_;
    std::string last_;
};

} // namespace addis::sim
