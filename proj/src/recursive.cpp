#include "dsagg/recursive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsagg/errors.hpp"
#include "dsagg/series.hpp"

namespace dsagg {

int default_burn_in(int m) { return std::max(10 * m, 1000); }

namespace {

void require_cover(const TimeSeriesView& eps, long first, long last_exclusive) {
    if (first < eps.t_min || last_exclusive > eps.t_end())
        throw IndexError("innovation series does not cover the simulation range");
}

void guard_value(double z, double guard) {
    if (!std::isfinite(z) || std::abs(z) > guard)
        throw DivergenceError("recursion exceeded the divergence guard");
}

// Lag-1..m coefficients of a causal sequence (index 0 unused).
std::vector<double> causal_window(const SequenceMap& s, std::span<const double> y, int m) {
    std::vector<double> out = s.dense(0, m, y);
    if (out.empty()) out.assign(1, 0.0);
    if (out[0] != 0.0) throw ContractError("recursion coefficients must start at lag 1");
    return out;
}

// Z_t = sum_k a_k Z_{t-k} + (b0 + sum_k b_k Z_{t-k}) e_t, zero history.
template <class Innov>
std::vector<double> run_bilinear(double b0, const std::vector<double>& a, const std::vector<double>& b,
                                 long start, long t_begin, long t_end, Innov innov, double guard) {
    const long total = t_end - start;
    std::vector<double> z(static_cast<std::size_t>(total), 0.0);
    const long ma = static_cast<long>(a.size()) - 1;
    const long mb = static_cast<long>(b.size()) - 1;
    for (long n = 0; n < total; ++n) {
        double mean_part = 0.0;
        for (long k = 1; k <= std::min(ma, n); ++k)
            mean_part += a[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(n - k)];
        double vol = b0;
        for (long k = 1; k <= std::min(mb, n); ++k)
            vol += b[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(n - k)];
        const double v = mean_part + vol * innov(start + n);
        guard_value(v, guard);
        z[static_cast<std::size_t>(n)] = v;
    }
    return {z.begin() + (t_begin - start), z.end()};
}

}  // namespace

std::vector<double> simulate_recursive(const CoefficientModel& model, std::span<const double> y,
                                       const TimeSeriesView& eps, long t_begin, long t_end,
                                       std::optional<int> burn_in, const Truncation& truncation,
                                       double guard) {
    if (t_end <= t_begin) return {};
    const int m = truncation.m;
    const int burn = burn_in.value_or(default_burn_in(m));
    if (burn < m) throw ContractError("simulate_recursive: burn_in must be at least the lag window");
    const long start = t_begin - burn;

    return std::visit(
        [&](const auto& mod) -> std::vector<double> {
            using T = std::decay_t<decltype(mod)>;
            auto arch_innov = [&](double lambda1, double lambda2) {
                const auto o = ArchOrthogonalization::from_moments(lambda1, lambda2);
                return [o, &eps](long t) {
                    const double e = o.destandardize(eps(t));
                    if (e < -1e-12) throw ContractError("ARCH innovation maps to a negative value");
                    return std::max(e, 0.0);
                };
            };
            if constexpr (std::is_same_v<T, LinearModel>) {
                const int lo = mod.c.support_lo(m), hi = mod.c.support_hi(m);
                std::vector<double> z(static_cast<std::size_t>(t_end - t_begin), 0.0);
                if (hi < lo) return z;
                require_cover(eps, t_begin - hi, t_end - lo);
                const auto c = mod.c.dense(lo, hi, y);
                for (long t = t_begin; t < t_end; ++t) {
                    double acc = 0.0;
                    for (int l = lo; l <= hi; ++l) acc += c[static_cast<std::size_t>(l - lo)] * eps(t - l);
                    z[static_cast<std::size_t>(t - t_begin)] = acc;
                }
                return z;
            } else if constexpr (std::is_same_v<T, BilinearModel>) {
                require_cover(eps, start, t_end);
                return run_bilinear(mod.b0(y), causal_window(mod.a, y, m), causal_window(mod.b, y, m),
                                    start, t_begin, t_end, [&](long t) { return eps(t); }, guard);
            } else if constexpr (std::is_same_v<T, LarchModel>) {
                require_cover(eps, start, t_end);
                return run_bilinear(mod.b0(y), std::vector<double>(1, 0.0), causal_window(mod.b, y, m),
                                    start, t_begin, t_end, [&](long t) { return eps(t); }, guard);
            } else if constexpr (std::is_same_v<T, ArchModel>) {
                require_cover(eps, start, t_end);
                return run_bilinear(mod.b0(y), std::vector<double>(1, 0.0), causal_window(mod.b, y, m),
                                    start, t_begin, t_end, arch_innov(mod.lambda1, mod.lambda2), guard);
            } else if constexpr (std::is_same_v<T, Arch1Model>) {
                require_cover(eps, start, t_end);
                return run_bilinear(mod.alpha0(y), std::vector<double>(1, 0.0),
                                    std::vector<double>{0.0, mod.alpha(y)}, start, t_begin, t_end,
                                    arch_innov(mod.lambda1, mod.lambda2), guard);
            } else if constexpr (std::is_same_v<T, Garch11Model>) {
                require_cover(eps, start, t_end);
                const double a0 = mod.alpha0(y), a = mod.alpha(y), be = mod.beta(y);
                if (a0 < 0.0 || a < 0.0 || be < 0.0)
                    throw DomainError("GARCH(1,1) parameters must be nonnegative");
                auto innov = arch_innov(mod.lambda1, mod.lambda2);
                std::vector<double> out;
                out.reserve(static_cast<std::size_t>(t_end - t_begin));
                double sigma2 = 0.0, z = 0.0;
                for (long t = start; t < t_end; ++t) {
                    sigma2 = a0 + a * z + be * sigma2;
                    z = sigma2 * innov(t);
                    guard_value(z, guard);
                    if (t >= t_begin) out.push_back(z);
                }
                return out;
            } else if constexpr (std::is_same_v<T, DsvStarModel>) {
                throw ContractError("DSV* models are evaluated through evaluate_chaos");
            } else {
                throw ContractError("DSULBS models are evaluated through simulate_dsulbs");
            }
        },
        model);
}

double LipschitzSequence::l1() const {
    double s = tail;
    for (double v : a) s += std::abs(v);
    return s;
}

LipschitzSequence dsulbs_lipschitz(const DsulbsModel& model, std::span<const double> y, int m,
                                   double innovation_bound) {
    LipschitzSequence out;
    const int lo = model.c.support_lo(m), hi = model.c.support_hi(m);
    out.lag_lo = lo;
    std::vector<double> c = hi >= lo ? model.c.dense(lo, hi, y) : std::vector<double>{};
    if (model.shift == DsulbsShift::ClippedLinear) {
        for (double v : c) out.a.push_back(std::abs(v));
        out.tail = model.c.tail_abs_outside(lo, hi, y);
        return out;
    }
    if (!std::isfinite(innovation_bound))
        throw ContractError("product shift requires bounded innovations");
    const double c0 = model.c.at(0, y);
    const double rest = model.c.l1_norm(y) - std::abs(c0);
    // eps_t multiplies everything, so lag 0 always belongs to the window
    out.lag_lo = std::min(lo, 0);
    for (int l = out.lag_lo; l <= std::max(hi, 0); ++l) {
        out.a.push_back(l == 0 ? std::abs(c0) + innovation_bound * rest
                               : innovation_bound * std::abs(model.c.at(l, y)));
    }
    out.tail += innovation_bound * model.c.tail_abs_outside(lo, hi, y);
    return out;
}

std::vector<double> simulate_dsulbs(const DsulbsModel& model, std::span<const double> y,
                                    const TimeSeriesView& eps, long t_begin, long t_end, int m,
                                    double innovation_bound) {
    if (t_end <= t_begin) return {};
    if (model.shift == DsulbsShift::Product && !std::isfinite(innovation_bound))
        throw ContractError("product shift requires bounded innovations");
    if (!(model.clip > 0.0)) throw ContractError("clip level must be positive");
    const int lo = model.c.support_lo(m), hi = model.c.support_hi(m);
    const int wlo = std::min(lo, 0), whi = std::max(hi, 0);
    require_cover(eps, t_begin - whi, t_end - wlo);
    std::vector<double> c = hi >= lo ? model.c.dense(lo, hi, y) : std::vector<double>{};
    std::vector<double> z;
    z.reserve(static_cast<std::size_t>(t_end - t_begin));
    for (long t = t_begin; t < t_end; ++t) {
        if (model.shift == DsulbsShift::ClippedLinear) {
            double acc = 0.0;
            for (int l = lo; l <= hi; ++l) acc += c[static_cast<std::size_t>(l - lo)] * eps(t - l);
            z.push_back(std::clamp(acc, -model.clip, model.clip));
        } else {
            double inner = 0.0;
            for (int l = lo; l <= hi; ++l)
                inner += c[static_cast<std::size_t>(l - lo)] * (l == 0 ? 1.0 : eps(t - l));
            z.push_back(eps(t) * inner);
        }
    }
    return z;
}

}  // namespace dsagg
