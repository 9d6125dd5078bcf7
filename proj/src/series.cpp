#include "dsagg/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsagg/errors.hpp"

namespace dsagg {

PowerSeries invert_power_series(const PowerSeries& b, std::size_t m) {
    if (b[0] != 0.0) throw ContractError("invert_power_series: b must have a zero constant term");
    std::vector<std::size_t> support;
    for (std::size_t j = 1; j < b.coeffs.size() && j <= m; ++j)
        if (b.coeffs[j] != 0.0) support.push_back(j);

    std::vector<double> g(m + 1, 0.0);
    g[0] = 1.0;
    for (std::size_t k = 1; k <= m; ++k) {
        double acc = 0.0;
        for (std::size_t j : support) {
            if (j > k) break;
            acc += b.coeffs[j] * g[k - j];
        }
        g[k] = acc;
    }
    return PowerSeries(std::move(g));
}

PowerSeries compose_h(const PowerSeries& a, const PowerSeries& g, std::size_t m) {
    std::vector<double> h(m + 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs.size() && i <= m; ++i) {
        const double ai = a.coeffs[i];
        if (ai == 0.0) continue;
        for (std::size_t j = 0; j < g.coeffs.size() && i + j <= m; ++j) h[i + j] += ai * g.coeffs[j];
    }
    return PowerSeries(std::move(h));
}

ArchCoefficients map_garch11(double alpha0, double alpha, double beta, std::size_t m) {
    if (!(beta >= 0.0 && beta < 1.0))
        throw DomainError("map_garch11: beta must lie in [0, 1)");
    if (alpha0 < 0.0 || alpha < 0.0)
        throw DomainError("map_garch11: alpha0 and alpha must be nonnegative");
    ArchCoefficients out;
    out.b0 = alpha0 / (1.0 - beta);
    std::vector<double> b(m + 1, 0.0);
    double p = alpha;
    for (std::size_t k = 1; k <= m; ++k) {
        b[k] = p;
        p *= beta;
    }
    out.b = PowerSeries(std::move(b));
    out.tail_bound = alpha == 0.0 ? 0.0 : alpha * std::pow(beta, static_cast<double>(m)) / (1.0 - beta);
    return out;
}

ArchOrthogonalization ArchOrthogonalization::from_moments(double lambda1, double lambda2) {
    if (!(lambda1 > 0.0)) throw ConfigError("ARCH innovations need lambda1 = E eps > 0");
    if (lambda2 < lambda1 * lambda1)
        throw ConfigError("ARCH innovation moments violate lambda2 >= lambda1^2");
    ArchOrthogonalization o;
    o.lambda1 = lambda1;
    o.lambda2 = lambda2;
    o.kappa = std::sqrt((lambda2 - lambda1 * lambda1) / (lambda1 * lambda1));
    return o;
}

double BilinearForm::centered_mass() const {
    if (!converged || h_sq >= 1.0) return std::numeric_limits<double>::infinity();
    return prefactor * prefactor * lead_sq / (1.0 - h_sq);
}

double BilinearForm::depth_mass(int depth) const {
    return prefactor * prefactor * lead_sq * std::pow(h_sq, depth);
}

double BilinearForm::depth_tail(int k_max) const {
    if (!converged || h_sq >= 1.0) return std::numeric_limits<double>::infinity();
    if (h_sq == 0.0) return 0.0;
    return prefactor * prefactor * lead_sq * std::pow(h_sq, k_max + 1) / (1.0 - h_sq);
}

bool is_bilinear_family(const CoefficientModel& model) {
    switch (tag_of(model)) {
        case ModelTag::Bilinear:
        case ModelTag::LarchInf:
        case ModelTag::ArchInf:
        case ModelTag::Garch11:
        case ModelTag::Arch1:
            return true;
        default:
            return false;
    }
}

std::size_t series_horizon(int m) { return static_cast<std::size_t>(std::max(4 * m, 512)); }

namespace {

// Coefficients of a lag-1+ sequence on [0, n] with index 0 forced to zero.
std::vector<double> causal_dense(const SequenceMap& seq, std::span<const double> y, std::size_t n,
                                 const char* what) {
    if (seq.kind == SequenceMap::Kind::TwoSidedGeometric || seq.support_lo(0) < 1) {
        const auto lo_values = seq.dense(seq.support_lo(static_cast<int>(n)), 0, y);
        if (std::any_of(lo_values.begin(), lo_values.end(), [](double v) { return v != 0.0; }))
            throw ContractError(std::string(what) + " coefficients must start at lag 1");
    }
    std::vector<double> out = seq.dense(0, static_cast<int>(n), y);
    out[0] = 0.0;
    return out;
}

// Sum of squares of v[start..] plus a geometric tail estimate from the last two entries.
// Returns +inf (and clears ok) when the sequence is not visibly decaying.
double sum_sq_with_tail(const std::vector<double>& v, std::size_t start, bool& ok) {
    double s = 0.0;
    double peak = 0.0;
    for (std::size_t i = start; i < v.size(); ++i) {
        s += v[i] * v[i];
        peak = std::max(peak, std::abs(v[i]));
    }
    if (v.size() < start + 2 || peak == 0.0) return s;
    const double last = std::abs(v.back());
    const double prev = std::abs(v[v.size() - 2]);
    if (last <= 1e-300) return s;
    const double ratio = prev > 0.0 ? last / prev : 1.0;
    if (ratio >= 1.0) {
        if (last > 1e-10 * peak) {
            ok = false;
            return std::numeric_limits<double>::infinity();
        }
        return s;
    }
    return s + last * last * ratio * ratio / (1.0 - ratio * ratio);
}

// (1 - x(s))^{-1} where x = scale * seq; closed form when seq is geometric from lag 1.
std::vector<double> invert_scaled(const SequenceMap& seq, double scale, std::span<const double> y,
                                  std::size_t n) {
    if (seq.kind == SequenceMap::Kind::Geometric && seq.lag_min == 1) {
        // x_j = A r^{j-1}  =>  g_k = A (r + A)^{k-1}
        const double a = scale * seq.amp(y);
        const double r = seq.rate(y);
        std::vector<double> g(n + 1, 0.0);
        g[0] = 1.0;
        double p = a;
        for (std::size_t k = 1; k <= n; ++k) {
            g[k] = p;
            p *= (r + a);
        }
        return g;
    }
    std::vector<double> x = causal_dense(seq, y, n, "series");
    for (double& v : x) v *= scale;
    return invert_power_series(PowerSeries(std::move(x)), n).coeffs;
}

// (scale * seq) * g truncated at n; recurrence when seq is geometric from lag 1.
std::vector<double> multiply_scaled(const SequenceMap& seq, double scale, std::span<const double> y,
                                    const std::vector<double>& g, std::size_t n) {
    if (seq.kind == SequenceMap::Kind::Geometric && seq.lag_min == 1) {
        const double a = scale * seq.amp(y);
        const double r = seq.rate(y);
        std::vector<double> h(n + 1, 0.0);
        for (std::size_t k = 1; k <= n; ++k) h[k] = r * h[k - 1] + a * g[k - 1];
        return h;
    }
    std::vector<double> x = causal_dense(seq, y, n, "series");
    for (double& v : x) v *= scale;
    return compose_h(PowerSeries(std::move(x)), PowerSeries(g), n).coeffs;
}

BilinearForm arch_form(double b0, const SequenceMap& b, double b_sum, const ArchOrthogonalization& o,
                       std::span<const double> y, std::size_t n) {
    BilinearForm f;
    f.lambda1 = o.lambda1;
    f.b_sum = b_sum;
    f.lead = invert_scaled(b, o.lambda1, y, n);
    f.h.assign(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) f.h[k] = o.kappa * f.lead[k];
    const double denom = 1.0 - o.lambda1 * b_sum;
    f.constant = denom > 0.0 ? o.lambda1 * b0 / denom : std::numeric_limits<double>::infinity();
    f.prefactor = o.kappa * f.constant;
    bool ok = true;
    f.lead_sq = sum_sq_with_tail(f.lead, 0, ok);
    f.h_sq = sum_sq_with_tail(f.h, 1, ok);
    f.converged = ok && denom > 0.0;
    return f;
}

}  // namespace

BilinearForm bilinear_form(const CoefficientModel& model, std::span<const double> y,
                           std::size_t horizon) {
    const std::size_t n = horizon;
    return std::visit(
        [&](const auto& m) -> BilinearForm {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, BilinearModel>) {
                BilinearForm f;
                f.prefactor = m.b0(y);
                f.lead = invert_scaled(m.a, 1.0, y, n);
                f.h = multiply_scaled(m.b, 1.0, y, f.lead, n);
                bool ok = true;
                f.lead_sq = sum_sq_with_tail(f.lead, 0, ok);
                f.h_sq = sum_sq_with_tail(f.h, 1, ok);
                f.converged = ok;
                return f;
            } else if constexpr (std::is_same_v<T, LarchModel>) {
                BilinearForm f;
                f.prefactor = m.b0(y);
                f.lead.assign(n + 1, 0.0);
                f.lead[0] = 1.0;
                f.h = causal_dense(m.b, y, n, "LARCH b");
                f.lead_sq = 1.0;
                if (m.b.summable_at(y)) {
                    f.h_sq = m.b.l2_sq(y);
                } else {
                    f.converged = false;
                    f.h_sq = std::numeric_limits<double>::infinity();
                }
                return f;
            } else if constexpr (std::is_same_v<T, ArchModel>) {
                const auto o = ArchOrthogonalization::from_moments(m.lambda1, m.lambda2);
                const double b_sum = m.b.summable_at(y) ? m.b.l1_norm(y)
                                                        : std::numeric_limits<double>::infinity();
                return arch_form(m.b0(y), m.b, b_sum, o, y, n);
            } else if constexpr (std::is_same_v<T, Garch11Model>) {
                const auto o = ArchOrthogonalization::from_moments(m.lambda1, m.lambda2);
                const double a0 = m.alpha0(y), a = m.alpha(y), be = m.beta(y);
                if (!(be >= 0.0 && be < 1.0)) throw DomainError("GARCH(1,1): beta must lie in [0, 1)");
                const SequenceMap b = SequenceMap::geometric(1, AffineMap::constant(a),
                                                             AffineMap::constant(be));
                BilinearForm f = arch_form(a0 / (1.0 - be), b, a / (1.0 - be), o, y, n);
                // closed forms: g_k = lambda1 alpha rho^{k-1}, h_k = kappa g_k
                const double rho = o.lambda1 * a + be;
                if (rho * rho < 1.0) {
                    const double l1a = o.lambda1 * a;
                    f.lead_sq = 1.0 + l1a * l1a / (1.0 - rho * rho);
                    f.h_sq = o.kappa * o.kappa * l1a * l1a / (1.0 - rho * rho);
                    f.converged = (1.0 - rho) > 0.0;
                } else {
                    f.converged = false;
                    f.h_sq = std::numeric_limits<double>::infinity();
                }
                return f;
            } else if constexpr (std::is_same_v<T, Arch1Model>) {
                const auto o = ArchOrthogonalization::from_moments(m.lambda1, m.lambda2);
                const double a = m.alpha(y);
                const SequenceMap b = SequenceMap::finite(1, {a});
                BilinearForm f = arch_form(m.alpha0(y), b, a, o, y, n);
                const double rho = o.lambda1 * a;
                if (rho * rho < 1.0) {
                    f.lead_sq = 1.0 + rho * rho / (1.0 - rho * rho);
                    f.h_sq = o.kappa * o.kappa * rho * rho / (1.0 - rho * rho);
                } else {
                    f.converged = false;
                    f.h_sq = std::numeric_limits<double>::infinity();
                }
                return f;
            } else {
                throw ContractError("bilinear_form: model is not in the bilinear family");
            }
        },
        model);
}

}  // namespace dsagg
