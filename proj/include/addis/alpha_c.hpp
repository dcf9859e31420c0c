#pragma once

// Joint null tail probabilities for batches of dependent p-values:
//   alpha^c_j = P( P_k > alpha_k for the listed earlier k, and P_j <= alpha_j ).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "addis/errors.hpp"
#include "addis/normal.hpp"

namespace addis {

/// A level already issued inside the batch, with the position of its
/// hypothesis in the batch (0-based).
struct PriorLevel {
    std::size_t position = 0;
    double level = 0.0;
};

struct AlphaCResult {
    double value = 0.0;
    double std_error = 0.0;  // zero for deterministic methods
};

class NullModel {
public:
    virtual ~NullModel() = default;
    virtual AlphaCResult alpha_c(const std::vector<PriorLevel>& prior, std::size_t position, double level) const = 0;
    virtual std::unique_ptr<NullModel> clone() const = 0;
    virtual std::string name() const = 0;
};

namespace detail {

struct GaussLegendreRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// Nodes by Newton iteration on the Legendre polynomial from the Chebyshev guess.
inline GaussLegendreRule make_gauss_legendre(std::size_t n) {
    GaussLegendreRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (std::size_t k = 0; k < (n + 1) / 2; ++k) {
        double x = std::cos(std::numbers::pi * (double(k) + 0.75) / (double(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t m = 2; m <= n; ++m) {
                const double p2 = ((2.0 * double(m) - 1.0) * x * p1 - (double(m) - 1.0) * p0) / double(m);
                p0 = p1;
                p1 = p2;
            }
            dp = double(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        // recompute the derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (std::size_t m = 2; m <= n; ++m) {
            const double p2 = ((2.0 * double(m) - 1.0) * x * p1 - (double(m) - 1.0) * p0) / double(m);
            p0 = p1;
            p1 = p2;
        }
        dp = double(n) * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[k] = -x;
        r.nodes[n - 1 - k] = x;
        r.weights[k] = r.weights[n - 1 - k] = w;
    }
    return r;
}

inline const GaussLegendreRule& gauss_legendre(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, GaussLegendreRule> cache;
    const std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
    return it->second;
}

} // namespace detail

struct QuadratureSettings {
    double lo = -8.0;
    double hi = 8.0;
    std::size_t min_nodes = 16;
    std::size_t max_nodes = 1024;
    double tol = 1e-10;
};

/// One-sided z-test p-values P = 1 - Phi(X) with X equicorrelated standard
/// normal (correlation rho) under the global null. Conditioning on the common
/// factor z makes the events independent:
///   alpha^c = int phi(z) prod_k Phi((c_k - sqrt(rho) z)/sqrt(1-rho))
///             (1 - Phi((c_j - sqrt(rho) z)/sqrt(1-rho))) dz,   c = Phi^{-1}(1 - level).
class EquicorrelatedGaussian final : public NullModel {
public:
    explicit EquicorrelatedGaussian(double rho, QuadratureSettings q = {}) : rho_(rho), q_(q) {
        if (!(rho >= 0.0 && rho < 1.0)) throw Error(Errc::InvalidConfig, "rho must lie in [0,1)");
    }

    AlphaCResult alpha_c(const std::vector<PriorLevel>& prior, std::size_t, double level) const override {
        if (prior.empty() || level <= 0.0) return {std::max(level, 0.0), 0.0};
        if (rho_ == 0.0) {
            double v = level;
            for (const auto& p : prior) v *= 1.0 - p.level;
            return {clamp(v, level), 0.0};
        }
        std::vector<double> c;
        c.reserve(prior.size());
        for (const auto& p : prior) c.push_back(normal_upper_quantile(p.level));
        const double cj = normal_upper_quantile(level);
        double previous = integrate(c, cj, q_.min_nodes);
        for (std::size_t n = 2 * q_.min_nodes; n <= q_.max_nodes; n *= 2) {
            const double current = integrate(c, cj, n);
            if (std::fabs(current - previous) < q_.tol) return {clamp(current, level), 0.0};
            previous = current;
        }
        std::ostringstream msg;
        msg << "alpha^c quadrature did not reach " << q_.tol << " with " << q_.max_nodes << " nodes";
        throw Error(Errc::QuadratureNonConvergence, msg.str());
    }

    std::unique_ptr<NullModel> clone() const override { return std::make_unique<EquicorrelatedGaussian>(*this); }
    std::string name() const override {
        std::ostringstream os;
        os << "equicorrelated-gaussian(rho=" << rho_ << ")";
        return os.str();
    }
    double rho() const { return rho_; }

private:
    static double clamp(double v, double level) { return std::min(std::max(v, 0.0), level); }

    double integrate(const std::vector<double>& c, double cj, std::size_t n) const {
        const auto& rule = detail::gauss_legendre(n);
        const double half = 0.5 * (q_.hi - q_.lo), mid = 0.5 * (q_.hi + q_.lo);
        const double sr = std::sqrt(rho_), s1 = std::sqrt(1.0 - rho_);
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double z = mid + half * rule.nodes[k];
            double f = normal_pdf(z) * normal_sf((cj - sr * z) / s1);
            for (double ck : c) {
                if (f == 0.0) break;
                f *= normal_cdf((ck - sr * z) / s1);
            }
            total += rule.weights[k] * f;
        }
        return half * total;
    }

    double rho_;
    QuadratureSettings q_;
};

/// Empirical joint null distribution: each row holds one draw of the batch's
/// p-values (column = position in batch). alpha^c is the fraction of rows in
/// the event, with its binomial standard error.
class EmpiricalNullModel final : public NullModel {
public:
    explicit EmpiricalNullModel(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {
        if (rows_.empty()) throw Error(Errc::ModelUnavailable, "sample file holds no rows");
        const std::size_t w = rows_.front().size();
        for (const auto& r : rows_)
            if (r.size() != w) throw Error(Errc::ModelUnavailable, "sample rows have different lengths");
    }

    /// Whitespace-separated rows; '#' starts a comment.
    static EmpiricalNullModel read(std::istream& in) {
        std::vector<std::vector<double>> rows;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            std::istringstream ls(line);
            std::vector<double> row;
            std::string tok;
            while (ls >> tok) {
                try {
                    row.push_back(std::stod(tok));
                } catch (const std::logic_error&) {
                    std::ostringstream msg;
                    msg << "line " << lineno << ": bad number '" << tok << "'";
                    throw Error(Errc::ParseError, msg.str());
                }
            }
            if (!row.empty()) rows.push_back(std::move(row));
        }
        return EmpiricalNullModel(std::move(rows));
    }

    AlphaCResult alpha_c(const std::vector<PriorLevel>& prior, std::size_t position, double level) const override {
        const std::size_t width = rows_.front().size();
        if (position >= width) throw Error(Errc::ModelUnavailable, "batch position beyond sample width");
        for (const auto& p : prior)
            if (p.position >= width) throw Error(Errc::ModelUnavailable, "batch position beyond sample width");
        std::size_t hits = 0;
        for (const auto& r : rows_) {
            if (r[position] > level) continue;
            bool all = true;
            for (const auto& p : prior)
                if (r[p.position] <= p.level) {
                    all = false;
                    break;
                }
            hits += all;
        }
        const double n = double(rows_.size());
        const double v = double(hits) / n;
        return {std::min(v, level), std::sqrt(v * (1.0 - v) / n)};
    }

    std::unique_ptr<NullModel> clone() const override { return std::make_unique<EmpiricalNullModel>(*this); }
    std::string name() const override { return "empirical(" + std::to_string(rows_.size()) + " rows)"; }

private:
    std::vector<std::vector<double>> rows_;
};

} // namespace addis
