#pragma once

// Weight schedules. Base weights g_{j,i} distribute the level of H_j over
// later hypotheses; adjusted weights g*_{j,i} additionally vanish on
// conflicting pairs. Both are evaluated lazily against a History that grows
// as hypotheses are registered and observed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "addis/core.hpp"
#include "addis/gamma.hpp"

namespace addis {

/// What a schedule may look at: gamma, the conflict sets registered so far
/// and the indicators observed so far.
struct History {
    explicit History(GammaSpec spec) : gamma(std::move(spec)) {}

    GammaTable gamma;
    ConflictStructure conflicts;
    std::vector<std::optional<Indicators>> indicators;

    std::size_t size() const { return conflicts.size(); }

    const Indicators& require(std::size_t k) const {
        if (k < 1 || k > indicators.size() || !indicators[k - 1]) {
            std::ostringstream msg;
            msg << "indicators of H" << k << " not yet reported";
            throw Error(Errc::MissingIndicator, msg.str());
        }
        return *indicators[k - 1];
    }
    bool observed(std::size_t k) const { return k >= 1 && k <= indicators.size() && indicators[k - 1].has_value(); }
};

// ---------------------------------------------------------------------------
// Base weights
// ---------------------------------------------------------------------------

class BaseWeights {
public:
    virtual ~BaseWeights() = default;
    /// g_{j,i} for i > j.
    virtual double operator()(const History& h, std::size_t j, std::size_t i) = 0;
    /// sum_{i > n} g_{j,i} for n >= j.
    virtual double tail(const History& h, std::size_t j, std::size_t n) = 0;
    virtual std::unique_ptr<BaseWeights> clone() const = 0;
    virtual std::string name() const = 0;
};

/// g_{j,i} = gamma_{i-j}
class ShiftedGammaWeights final : public BaseWeights {
public:
    double operator()(const History& h, std::size_t j, std::size_t i) override { return h.gamma(i - j); }
    double tail(const History& h, std::size_t j, std::size_t n) override { return h.gamma.tail(n - j); }
    std::unique_ptr<BaseWeights> clone() const override { return std::make_unique<ShiftedGammaWeights>(*this); }
    std::string name() const override { return "shifted-gamma"; }
};

/// g_{j,i} = 1/m for i in {j+1, ..., j+m}.
class UniformNextWeights final : public BaseWeights {
public:
    explicit UniformNextWeights(std::size_t m) : m_(m) {
        if (m == 0) throw Error(Errc::InvalidSpec, "uniform weights need m >= 1");
    }
    double operator()(const History&, std::size_t j, std::size_t i) override {
        return i > j && i - j <= m_ ? 1.0 / double(m_) : 0.0;
    }
    double tail(const History&, std::size_t j, std::size_t n) override {
        const std::size_t last = j + m_;
        return n >= last ? 0.0 : double(last - n) / double(m_);
    }
    std::unique_ptr<BaseWeights> clone() const override { return std::make_unique<UniformNextWeights>(*this); }
    std::string name() const override { return "uniform:" + std::to_string(m_); }

private:
    std::size_t m_;
};

/// g_{j,i} = (gamma_{t(j)+i-j-1} - gamma_{t(j)+i-j}) / gamma_{t(j)} with
/// t(j) = 1 + sum_{k<j} (S_k - C_k). Rows telescope to one.
inline double telescoping_weight(const GammaTable& gamma, std::size_t t_j, std::size_t j, std::size_t i) {
    if (i <= j || t_j < 1) throw Error(Errc::DomainError, "telescoping weight needs i > j and t_j >= 1");
    const double gt = gamma(t_j);
    if (gt == 0.0) return 0.0;
    const double w = (gamma(t_j + i - j - 1) - gamma(t_j + i - j)) / gt;
    if (w < 0.0) {
        std::ostringstream msg;
        msg << "gamma increases between " << t_j + i - j - 1 << " and " << t_j + i - j;
        throw Error(Errc::NonMonotoneGamma, msg.str());
    }
    return w;
}

class TelescopingWeights final : public BaseWeights {
public:
    double operator()(const History& h, std::size_t j, std::size_t i) override {
        return telescoping_weight(h.gamma, t(h, j), j, i);
    }
    double tail(const History& h, std::size_t j, std::size_t n) override {
        const std::size_t tj = t(h, j);
        const double gt = h.gamma(tj);
        return gt == 0.0 ? 0.0 : h.gamma(tj + n - j) / gt;
    }
    std::unique_ptr<BaseWeights> clone() const override { return std::make_unique<TelescopingWeights>(*this); }
    std::string name() const override { return "telescoping"; }

    /// t(j); needs indicators for every k < j.
    std::size_t t(const History& h, std::size_t j) {
        while (prefix_.size() < j) {
            const std::size_t k = prefix_.size();  // prefix_[k] = t(k+1)
            prefix_.push_back(k == 0 ? 1 : prefix_.back() + std::size_t(h.require(k).spent()));
        }
        return prefix_[j - 1];
    }

private:
    std::vector<std::size_t> prefix_;
};

/// Rows given explicitly (sparse).
class TableWeights final : public BaseWeights {
public:
    using Rows = std::map<std::size_t, std::map<std::size_t, double>>;
    explicit TableWeights(Rows rows) : rows_(std::move(rows)) {}

    double operator()(const History&, std::size_t j, std::size_t i) override {
        auto r = rows_.find(j);
        if (r == rows_.end()) return 0.0;
        auto c = r->second.find(i);
        return c == r->second.end() ? 0.0 : c->second;
    }
    double tail(const History&, std::size_t j, std::size_t n) override {
        auto r = rows_.find(j);
        if (r == rows_.end()) return 0.0;
        double s = 0.0;
        for (auto it = r->second.upper_bound(n); it != r->second.end(); ++it) s += it->second;
        return s;
    }
    std::unique_ptr<BaseWeights> clone() const override { return std::make_unique<TableWeights>(*this); }
    std::string name() const override { return "table"; }

    const Rows& rows() const { return rows_; }
    Rows& rows() { return rows_; }

private:
    Rows rows_;
};

// ---------------------------------------------------------------------------
// Conflict-adjusted weights
// ---------------------------------------------------------------------------

class AdjustedWeights {
public:
    virtual ~AdjustedWeights() = default;
    /// g*_{j,i}; exactly zero whenever j is in X_i. Both j and i must be registered.
    virtual double operator()(const History& h, std::size_t j, std::size_t i) = 0;
    /// Total mass of row j over all i > j (before truncation at any horizon).
    virtual double row_total(const History& h, std::size_t j) = 0;
    virtual std::unique_ptr<AdjustedWeights> clone() const = 0;
    virtual std::string name() const = 0;

    /// Mass of row j beyond index n, assuming nothing after n conflicts with j.
    double tail(const History& h, std::size_t j, std::size_t n) {
        double used = 0.0;
        for (std::size_t i = j + 1; i <= n; ++i) used += (*this)(h, j, i);
        return std::max(0.0, row_total(h, j) - used);
    }

    /// Rows whose entire remaining mass was blocked (weights set to zero).
    std::size_t degenerate_rows() const { return degenerate_; }

protected:
    std::size_t degenerate_ = 0;
};

/// g*_{j,i} = g_{j,i} / (1 - sum_{k=j+1}^{d_j-1} g_{j,k}) for i >= d_j, zero
/// before; d_j is the first index after j that does not conflict with j.
class RenormalizedWeights final : public AdjustedWeights {
public:
    explicit RenormalizedWeights(std::unique_ptr<BaseWeights> base) : base_(std::move(base)) {}
    RenormalizedWeights(const RenormalizedWeights& o) : AdjustedWeights(o), base_(o.base_->clone()), scale_(o.scale_) {}

    double operator()(const History& h, std::size_t j, std::size_t i) override {
        if (h.conflicts.conflicts(j, i)) return 0.0;
        const double s = scale(h, j, i);
        return s == 0.0 ? 0.0 : (*base_)(h, j, i) * s;
    }
    double row_total(const History& h, std::size_t j) override {
        const auto d = h.conflicts.first_free(j);
        const std::size_t last = d ? *d - 1 : h.size();
        const double s = d ? scale(h, j, *d) : blocked_scale(h, j, last);
        return s * base_->tail(h, j, last);
    }
    std::unique_ptr<AdjustedWeights> clone() const override { return std::make_unique<RenormalizedWeights>(*this); }
    std::string name() const override { return "renormalized(" + base_->name() + ")"; }

    BaseWeights& base() { return *base_; }

private:
    /// 1/(1 - blocked mass) for row j, fixed once d_j is known (d_j <= i).
    double scale(const History& h, std::size_t j, std::size_t i) {
        if (scale_.size() < j) scale_.resize(j);
        auto& s = scale_[j - 1];
        if (!s) {
            const auto d = h.conflicts.first_free(j);
            if (!d || *d > i) throw Error(Errc::InvalidSpec, "renormalization queried before d_j is known");
            s = blocked_scale(h, j, *d - 1);
            if (*s == 0.0) ++degenerate_;
        }
        return *s;
    }
    double blocked_scale(const History& h, std::size_t j, std::size_t last_blocked) {
        double blocked = 0.0;
        for (std::size_t k = j + 1; k <= last_blocked; ++k) blocked += (*base_)(h, j, k);
        return blocked >= 1.0 - 1e-15 ? 0.0 : 1.0 / (1.0 - blocked);
    }

    std::unique_ptr<BaseWeights> base_;
    std::vector<std::optional<double>> scale_;
};

/// Adjusted weights that reroute blocked mass along the telescoping graph so that
/// the resulting graph procedure dominates ADDIS-Spending under local
/// dependence. Requires lag-form conflicts.
///
/// With g-_{j,l} the mass of row j that is unusable at l, the rerouting
/// recursion collapses to
///   g*_{j,i} = g_{j,i} + sum_{l=j+1}^{i-L_i-1} g-_{j,l} g_{l,i}   (i - L_i > j)
///   g-_{j,l} = g_{j,l} + sum_{m=j+1}^{l-1} g-_{j,m} g_{m,l}       (l - L_l <= j)
///   g-_{j,l} = sum_{m=l-L_l}^{l-1} g_{m,l} g-_{j,m}               (l - L_l > j)
/// since the subtraction in the non-conflicting case cancels exactly the
/// inflow routed through indices that conflict with i.
class ReroutedWeights final : public AdjustedWeights {
public:
    double operator()(const History& h, std::size_t j, std::size_t i) override {
        const std::size_t left = h.conflicts.left_end(i);
        if (left <= j) return 0.0;
        auto& row = extend(h, j, left - 1);
        double w = g_(h, j, i);
        for (std::size_t k = 0; k < row.blocked.size(); ++k) {
            const std::size_t l = j + 1 + k;
            if (l >= left) break;
            if (row.blocked[k] != 0.0) w += row.blocked[k] * g_(h, l, i);
        }
        return w;
    }

    /// Telescoping rows sum to one and rerouting conserves mass.
    double row_total(const History& h, std::size_t j) override { return h.gamma(g_.t(h, j)) == 0.0 ? 0.0 : 1.0; }

    std::unique_ptr<AdjustedWeights> clone() const override { return std::make_unique<ReroutedWeights>(*this); }
    std::string name() const override { return "rerouted"; }

    /// g-_{j,l} for l in (j, upto]; zero beyond the stored support.
    const std::vector<double>& blocked_row(const History& h, std::size_t j, std::size_t upto) {
        return extend(h, j, upto).blocked;
    }

    /// Mass of row j that flows past index n: base tail plus rerouted tails.
    double overflow(const History& h, std::size_t j, std::size_t n) {
        auto& row = extend(h, j, n);
        double m = g_.tail(h, j, n);
        for (std::size_t k = 0; k < row.blocked.size() && j + 1 + k <= n; ++k)
            if (row.blocked[k] != 0.0) m += row.blocked[k] * g_.tail(h, j + 1 + k, n);
        return m;
    }

    TelescopingWeights& base() { return g_; }

private:
    struct Row {
        std::vector<double> blocked;  // g-_{j,l} for l = j+1, j+2, ...
        std::size_t frontier = 0;     // largest l evaluated
        std::size_t last_nonzero = 0;
        bool dead = false;
    };

    Row& extend(const History& h, std::size_t j, std::size_t upto) {
        if (rows_.size() < j) rows_.resize(j);
        Row& row = rows_[j - 1];
        if (row.frontier < j) row.frontier = j;
        while (!row.dead && row.frontier < upto) {
            const std::size_t l = row.frontier + 1;
            const std::size_t left = h.conflicts.left_end(l);
            double v = 0.0;
            if (left <= j) {
                v = g_(h, j, l);
                for (std::size_t m = j + 1; m < l; ++m) {
                    const double b = row.blocked[m - j - 1];
                    if (b != 0.0) v += b * g_(h, m, l);
                }
            } else {
                for (std::size_t m = left; m < l; ++m) {
                    const double b = row.blocked[m - j - 1];
                    if (b != 0.0) v += g_(h, m, l) * b;
                }
            }
            row.blocked.push_back(v);
            row.frontier = l;
            if (v != 0.0) row.last_nonzero = l;
            // left ends never decrease, so once the window has passed the support nothing flows again
            if (left > j && left > row.last_nonzero) {
                row.dead = true;
                row.blocked.resize(row.last_nonzero > j ? row.last_nonzero - j : 0);
            }
        }
        return row;
    }

    TelescopingWeights g_;
    std::vector<Row> rows_;
};

/// Adjusted weights supplied as an explicit table; a nonzero entry on a
/// conflicting pair is a ScheduleViolation.
class ExplicitAdjustedWeights final : public AdjustedWeights {
public:
    explicit ExplicitAdjustedWeights(TableWeights::Rows rows) : table_(std::move(rows)) {}

    double operator()(const History& h, std::size_t j, std::size_t i) override {
        const double w = table_(h, j, i);
        if (w != 0.0 && h.conflicts.conflicts(j, i)) {
            std::ostringstream msg;
            msg << "g*_{" << j << "," << i << "} = " << w << " but " << j << " is in X_" << i;
            throw Error(Errc::ScheduleViolation, msg.str());
        }
        return w;
    }
    double row_total(const History& h, std::size_t j) override { return table_.tail(h, j, j); }
    std::unique_ptr<AdjustedWeights> clone() const override { return std::make_unique<ExplicitAdjustedWeights>(*this); }
    std::string name() const override { return "explicit"; }

private:
    TableWeights table_;
};

/// 1/m on each of the first m indices after j that do not conflict with j.
class UniformNextFreeWeights final : public AdjustedWeights {
public:
    explicit UniformNextFreeWeights(std::size_t m) : m_(m) {
        if (m == 0) throw Error(Errc::InvalidSpec, "uniform weights need m >= 1");
    }
    double operator()(const History& h, std::size_t j, std::size_t i) override {
        if (h.conflicts.conflicts(j, i)) return 0.0;
        const auto d = h.conflicts.first_free(j);
        return d && i >= *d && i - *d < m_ ? 1.0 / double(m_) : 0.0;
    }
    double row_total(const History&, std::size_t) override { return 1.0; }
    std::unique_ptr<AdjustedWeights> clone() const override { return std::make_unique<UniformNextFreeWeights>(*this); }
    std::string name() const override { return "uniform-free:" + std::to_string(m_); }

private:
    std::size_t m_;
};

/// Reward weights h* for the FDR engine. By default the same rule as g*.
inline std::unique_ptr<AdjustedWeights> reward_weights(const AdjustedWeights& g_star) { return g_star.clone(); }

// ---------------------------------------------------------------------------
// Standalone rerouted table
// ---------------------------------------------------------------------------

inline constexpr std::size_t default_horizon_cap = 2000;

struct WeightTableResult {
    std::size_t n = 0;
    std::vector<std::vector<double>> w;  // w[j][i], 1 <= j < i <= n
    std::vector<double> overflow;        // overflow[j]: mass of row j past n
};

/// Indicators with the given U (U=1: p above tau; U=0: p in (lambda, tau]).
inline Indicators indicators_from_u(int u) { return u ? Indicators{false, false, false} : Indicators{true, false, false}; }

/// The full rerouted g* table for 1 <= j < i <= n given lags and a U feed
/// (u[k-1] = U_k, at least n-1 entries).
inline WeightTableResult rerouted_weights(const GammaSpec& spec, const std::vector<std::size_t>& lags,
                                            const std::vector<int>& u, std::size_t n,
                                            std::size_t horizon_cap = default_horizon_cap) {
    if (n > horizon_cap) {
        std::ostringstream msg;
        msg << "horizon " << n << " exceeds cap " << horizon_cap;
        throw Error(Errc::HorizonExceeded, msg.str());
    }
    if (lags.size() < n || u.size() + 1 < n) throw Error(Errc::InvalidSpec, "lags/indicator feed shorter than horizon");
    require_nonincreasing(spec, 2 * n + 2);
    History h(spec);
    h.conflicts = validate_conflicts(ConflictStructure::from_lags(std::span(lags.data(), n)), true);
    for (std::size_t k = 0; k < n; ++k) h.indicators.push_back(k < u.size() ? std::optional(indicators_from_u(u[k])) : std::nullopt);
    ReroutedWeights a1;
    WeightTableResult out;
    out.n = n;
    out.w.assign(n + 1, std::vector<double>(n + 1, 0.0));
    out.overflow.assign(n + 1, 0.0);
    for (std::size_t j = 1; j < n; ++j) {
        for (std::size_t i = j + 1; i <= n; ++i) out.w[j][i] = a1(h, j, i);
        out.overflow[j] = a1.overflow(h, j, n);
    }
    if (n >= 1) out.overflow[n] = 1.0;
    return out;
}

// ---------------------------------------------------------------------------
// Weight table text format
//
//   kind = base | adjusted | reward
//   # comment
//   <j> <i> <weight>
// ---------------------------------------------------------------------------

struct WeightTable {
    std::string kind = "base";
    TableWeights::Rows rows;
};

inline WeightTable read_weight_table(std::istream& in) {
    WeightTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_kind = false;
    auto fail = [&](const std::string& what) {
        std::ostringstream msg;
        msg << "line " << lineno << ": " << what;
        throw Error(Errc::ParseError, msg.str());
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (first == "kind" || first.rfind("kind=", 0) == 0) {
            std::string rest = first == "kind" ? "" : first.substr(5);
            std::string tok;
            while (ls >> tok) rest += tok;
            if (!rest.empty() && rest[0] == '=') rest.erase(0, 1);
            if (rest != "base" && rest != "adjusted" && rest != "reward") fail("unknown kind '" + rest + "'");
            t.kind = rest;
            have_kind = true;
            continue;
        }
        std::size_t j = 0, i = 0;
        double w = 0.0;
        try {
            j = std::stoul(first);
        } catch (const std::logic_error&) {
            fail("expected '<j> <i> <weight>'");
        }
        if (!(ls >> i >> w)) fail("expected '<j> <i> <weight>'");
        std::string extra;
        if (ls >> extra) fail("trailing text '" + extra + "'");
        if (j < 1 || i <= j) fail("need 1 <= j < i");
        if (!(w >= 0.0)) fail("negative weight");
        t.rows[j][i] = w;
    }
    if (!have_kind) throw Error(Errc::ParseError, "missing 'kind =' header");
    for (const auto& [j, row] : t.rows) {
        double s = 0.0;
        for (const auto& [i, w] : row) s += w;
        if (s > 1.0 + 1e-12) {
            std::ostringstream msg;
            msg << "row " << j << " sums to " << s << " > 1";
            throw Error(Errc::InvalidSpec, msg.str());
        }
    }
    return t;
}

inline void write_weight_table(std::ostream& out, const WeightTable& t) {
    out << "kind = " << t.kind << "\n";
    out.precision(17);
    for (const auto& [j, row] : t.rows)
        for (const auto& [i, w] : row) out << j << " " << i << " " << w << "\n";
}

} // namespace addis
