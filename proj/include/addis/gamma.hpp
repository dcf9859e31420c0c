#pragma once

// Catalog of gamma sequences (nonnegative, summing to at most one).

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "addis/errors.hpp"

namespace addis {

enum class GammaKind { LogQ, Power, Basel, Geometric, Custom };

struct GammaSpec {
    GammaKind kind = GammaKind::Basel;
    double param = 0.0;         // exponent s (power) or ratio q (geometric)
    std::vector<double> table;  // custom: gamma_1..gamma_K, zero afterwards

    static GammaSpec logq() { return {GammaKind::LogQ, 0.0, {}}; }
    static GammaSpec power(double s) {
        if (!(s > 1.0)) throw Error(Errc::InvalidSpec, "power exponent must exceed 1");
        return {GammaKind::Power, s, {}};
    }
    static GammaSpec basel() { return {GammaKind::Basel, 0.0, {}}; }
    static GammaSpec geometric(double q) {
        if (!(q > 0.0 && q < 1.0)) throw Error(Errc::InvalidSpec, "geometric ratio must lie in (0,1)");
        return {GammaKind::Geometric, q, {}};
    }
    static GammaSpec custom(std::vector<double> values) {
        double total = 0.0;
        for (double v : values) {
            if (!(v >= 0.0)) throw Error(Errc::InvalidSpec, "custom gamma entries must be nonnegative");
            total += v;
        }
        if (total > 1.0 + 1e-12) throw Error(Errc::InvalidSpec, "custom gamma table sums to more than 1");
        return {GammaKind::Custom, 0.0, std::move(values)};
    }

    /// Short identifier used in CSV output and config files.
    std::string id() const {
        std::ostringstream os;
        switch (kind) {
        case GammaKind::LogQ: return "logq";
        case GammaKind::Basel: return "basel";
        case GammaKind::Power: os << "power:" << param; return os.str();
        case GammaKind::Geometric: os << "geometric:" << param; return os.str();
        case GammaKind::Custom: os << "custom:" << table.size(); return os.str();
        }
        return "?";
    }

    /// Inverse of id() for the built-in kinds: "logq", "basel", "power:1.6", "geometric:0.6".
    static GammaSpec parse(const std::string& text) {
        const auto colon = text.find(':');
        const std::string head = text.substr(0, colon);
        auto number = [&]() {
            if (colon == std::string::npos) throw Error(Errc::InvalidSpec, "gamma spec '" + text + "' needs a parameter");
            try {
                std::size_t used = 0;
                const double v = std::stod(text.substr(colon + 1), &used);
                if (used != text.size() - colon - 1) throw std::invalid_argument(text);
                return v;
            } catch (const std::logic_error&) {
                throw Error(Errc::InvalidSpec, "bad gamma parameter in '" + text + "'");
            }
        };
        if (head == "logq") return logq();
        if (head == "basel") return basel();
        if (head == "power") return power(number());
        if (head == "geometric") return geometric(number());
        throw Error(Errc::InvalidSpec, "unknown gamma kind '" + text + "'");
    }
};

namespace detail {

inline constexpr std::size_t gamma_partial_terms = 1000000;

inline double logq_raw(double i) {
    const double l = std::log(i + 1.0);
    return 1.0 / ((i + 1.0) * l * l);
}

/// Sum of the unnormalized series: terms 1..N summed smallest first, then an
/// Euler-Maclaurin tail (integral + half term + first derivative correction).
inline double raw_series_total(GammaKind kind, double s) {
    const std::size_t N = gamma_partial_terms;
    auto f = [&](double x) { return kind == GammaKind::LogQ ? logq_raw(x) : std::pow(x, -s); };
    double sum = 0.0, comp = 0.0;
    for (std::size_t i = N; i >= 1; --i) {
        const double y = f(double(i)) - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    const double a = double(N + 1);
    double integral, deriv;
    if (kind == GammaKind::LogQ) {
        const double l = std::log(a + 1.0);
        integral = 1.0 / std::log(a + 1.0);
        deriv = -(l + 2.0) / ((a + 1.0) * (a + 1.0) * l * l * l);
    } else {
        integral = std::pow(a, 1.0 - s) / (s - 1.0);
        deriv = -s * std::pow(a, -s - 1.0);
    }
    return sum + integral + 0.5 * f(a) - deriv / 12.0;
}

inline double normalizer(GammaKind kind, double s) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, double> cache;
    const std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_pair(int(kind), s);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double c = 1.0 / raw_series_total(kind, s);
    cache.emplace(key, c);
    return c;
}

} // namespace detail

/// Normalizing constant c with gamma_i = c * f(i); 1 for the closed-form kinds.
inline double gamma_normalizer(const GammaSpec& spec) {
    switch (spec.kind) {
    case GammaKind::LogQ:
    case GammaKind::Power: return detail::normalizer(spec.kind, spec.param);
    default: return 1.0;
    }
}

inline double gamma_value(const GammaSpec& spec, std::size_t i) {
    if (i < 1) throw Error(Errc::DomainError, "gamma index must be >= 1");
    const double x = double(i);
    switch (spec.kind) {
    case GammaKind::LogQ: return gamma_normalizer(spec) * detail::logq_raw(x);
    case GammaKind::Power: return gamma_normalizer(spec) * std::pow(x, -spec.param);
    case GammaKind::Basel: return 6.0 / (std::numbers::pi * std::numbers::pi * x * x);
    case GammaKind::Geometric: return std::pow(spec.param, x - 1.0) * (1.0 - spec.param);
    case GammaKind::Custom: return i <= spec.table.size() ? spec.table[i - 1] : 0.0;
    }
    return 0.0;
}

/// Throws NonMonotoneGamma if gamma increases anywhere in 1..horizon.
inline void require_nonincreasing(const GammaSpec& spec, std::size_t horizon) {
    if (spec.kind != GammaKind::Custom) return;
    for (std::size_t i = 2; i <= horizon; ++i) {
        if (gamma_value(spec, i) > gamma_value(spec, i - 1)) {
            std::ostringstream msg;
            msg << "gamma_" << i << " > gamma_" << i - 1;
            throw Error(Errc::NonMonotoneGamma, msg.str());
        }
    }
}

/// Memoized gamma_1, gamma_2, ... with prefix sums; one per engine.
class GammaTable {
public:
    explicit GammaTable(GammaSpec spec) : spec_(std::move(spec)) {}

    const GammaSpec& spec() const { return spec_; }

    double operator()(std::size_t i) const {
        if (i < 1) throw Error(Errc::DomainError, "gamma index must be >= 1");
        grow(i);
        return values_[i - 1];
    }

    /// sum_{i > m} gamma_i
    double tail(std::size_t m) const {
        if (spec_.kind == GammaKind::Geometric) return std::pow(spec_.param, double(m));
        if (m == 0) return total();
        grow(m);
        return total() - prefix_[m - 1];
    }

    /// sum_{i >= 1} gamma_i
    double total() const {
        if (spec_.kind == GammaKind::Custom) {
            double t = 0.0;
            for (double v : spec_.table) t += v;
            return t;
        }
        return 1.0;
    }

private:
    void grow(std::size_t i) const {
        while (values_.size() < i) {
            const double v = gamma_value(spec_, values_.size() + 1);
            values_.push_back(v);
            prefix_.push_back((prefix_.empty() ? 0.0 : prefix_.back()) + v);
        }
    }

    GammaSpec spec_;
    mutable std::vector<double> values_;
    mutable std::vector<double> prefix_;
};

} // namespace addis
