#include "dsagg/environment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "dsagg/chaos.hpp"
#include "dsagg/errors.hpp"
#include "dsagg/innovations.hpp"
#include "dsagg/parallel.hpp"
#include "dsagg/recursive.hpp"
#include "dsagg/rng.hpp"
#include "dsagg/series.hpp"

namespace dsagg {

namespace {

constexpr std::array<std::pair<MarginalFamily, std::string_view>, 4> kFamilies{{
    {MarginalFamily::PointMass, "point_mass"},
    {MarginalFamily::UniformBox, "uniform"},
    {MarginalFamily::BetaScaled, "beta"},
    {MarginalFamily::TruncatedNormal, "truncated_normal"},
}};

constexpr double kInf = std::numeric_limits<double>::infinity();

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(std::span<const double> v) {
    MeanSe r;
    if (v.empty()) return r;
    const double n = static_cast<double>(v.size());
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() < 2) return r;
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
    return r;
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

std::string_view to_string(MarginalFamily family) {
    for (const auto& [f, n] : kFamilies)
        if (f == family) return n;
    return "unknown";
}

MarginalFamily marginal_family_from_string(std::string_view name) {
    for (const auto& [f, n] : kFamilies)
        if (n == name) return f;
    throw ConfigError("unknown environment family '" + std::string(name) + "'");
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass:
            return "pass";
        case Verdict::Fail:
            return "fail";
        case Verdict::Inconclusive:
            return "inconclusive";
    }
    return "unknown";
}

void EnvironmentSpec::validate() const {
    if (coords.empty()) throw ConfigError("environment dimension must be at least 1");
    for (std::size_t d = 0; d < coords.size(); ++d) {
        const CoordinateLaw& c = coords[d];
        const std::string where = "environment coordinate " + std::to_string(d) + ": ";
        switch (family) {
            case MarginalFamily::PointMass:
                if (!std::isfinite(c.value)) throw ConfigError(where + "point mass must be finite");
                break;
            case MarginalFamily::UniformBox:
            case MarginalFamily::BetaScaled:
            case MarginalFamily::TruncatedNormal:
                if (!std::isfinite(c.lo) || !std::isfinite(c.hi) || !(c.hi >= c.lo))
                    throw ConfigError(where + "box needs finite lo <= hi");
                break;
        }
        if (family == MarginalFamily::BetaScaled && !(c.shape_a > 0.0 && c.shape_b > 0.0))
            throw ConfigError(where + "beta shapes must be positive");
        if (family == MarginalFamily::TruncatedNormal) {
            if (!(c.sd > 0.0) || !std::isfinite(c.mean))
                throw ConfigError(where + "truncated normal needs finite mean and sd > 0");
            if (!(c.hi > c.lo)) throw ConfigError(where + "truncated normal needs lo < hi");
        }
    }
}

std::vector<double> EnvironmentSpec::mean() const {
    std::vector<double> m;
    for (const auto& c : coords) {
        switch (family) {
            case MarginalFamily::PointMass:
                m.push_back(c.value);
                break;
            case MarginalFamily::UniformBox:
                m.push_back(0.5 * (c.lo + c.hi));
                break;
            case MarginalFamily::BetaScaled:
                m.push_back(c.lo + (c.hi - c.lo) * c.shape_a / (c.shape_a + c.shape_b));
                break;
            case MarginalFamily::TruncatedNormal: {
                const double a = (c.lo - c.mean) / c.sd, b = (c.hi - c.mean) / c.sd;
                const double z = std_normal_cdf(b) - std_normal_cdf(a);
                m.push_back(c.mean + c.sd * (std_normal_pdf(a) - std_normal_pdf(b)) / z);
                break;
            }
        }
    }
    return m;
}

std::vector<double> EnvironmentSpec::second_moment() const {
    const std::size_t s = coords.size();
    const auto mu = mean();
    std::vector<double> out(s * s, 0.0);
    for (std::size_t d = 0; d < s; ++d) {
        for (std::size_t e = 0; e < s; ++e) out[d * s + e] = mu[d] * mu[e];
        const CoordinateLaw& c = coords[d];
        double var = 0.0;
        switch (family) {
            case MarginalFamily::PointMass:
                break;
            case MarginalFamily::UniformBox:
                var = (c.hi - c.lo) * (c.hi - c.lo) / 12.0;
                break;
            case MarginalFamily::BetaScaled: {
                const double ab = c.shape_a + c.shape_b;
                var = (c.hi - c.lo) * (c.hi - c.lo) * c.shape_a * c.shape_b / (ab * ab * (ab + 1.0));
                break;
            }
            case MarginalFamily::TruncatedNormal: {
                const double a = (c.lo - c.mean) / c.sd, b = (c.hi - c.mean) / c.sd;
                const double z = std_normal_cdf(b) - std_normal_cdf(a);
                const double r = (std_normal_pdf(a) - std_normal_pdf(b)) / z;
                var = c.sd * c.sd * (1.0 + (a * std_normal_pdf(a) - b * std_normal_pdf(b)) / z - r * r);
                break;
            }
        }
        out[d * s + d] += var;
    }
    return out;
}

EnvironmentDraw EnvironmentDraw::prefix(std::size_t count) const {
    if (count > n) throw IndexError("environment prefix longer than the draw");
    EnvironmentDraw d = *this;
    d.n = count;
    d.values.resize(count * s);
    return d;
}

EnvironmentDraw sample_environment(const EnvironmentSpec& spec, std::size_t n, std::uint64_t seed,
                                   std::uint64_t draw_index) {
    if (n == 0) throw ContractError("sample_environment: n must be at least 1");
    spec.validate();
    EnvironmentDraw d;
    d.n = n;
    d.s = spec.dimension();
    d.seed = seed;
    d.draw_index = draw_index;
    d.values.resize(n * d.s);
    Rng rng = make_rng(seed, spec.label, draw_index);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const boost::math::normal_distribution<double> normal;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d.s; ++k) {
            const CoordinateLaw& c = spec.coords[k];
            double v = 0.0;
            switch (spec.family) {
                case MarginalFamily::PointMass:
                    v = c.value;
                    break;
                case MarginalFamily::UniformBox:
                    v = c.lo + (c.hi - c.lo) * unif(rng);
                    break;
                case MarginalFamily::BetaScaled: {
                    std::gamma_distribution<double> ga(c.shape_a, 1.0), gb(c.shape_b, 1.0);
                    const double x = ga(rng), w = gb(rng);
                    const double beta = x + w > 0.0 ? x / (x + w) : 0.5;
                    v = c.lo + (c.hi - c.lo) * beta;
                    break;
                }
                case MarginalFamily::TruncatedNormal: {
                    const double pa = cdf(normal, (c.lo - c.mean) / c.sd);
                    const double pb = cdf(normal, (c.hi - c.mean) / c.sd);
                    double p = pa + (pb - pa) * unif(rng);
                    p = std::clamp(p, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
                    v = std::clamp(c.mean + c.sd * quantile(normal, p), c.lo, c.hi);
                    break;
                }
            }
            d.values[i * d.s + k] = v;
        }
    }
    return d;
}

Verdict ExistenceReport::overall() const {
    bool inconclusive = false;
    for (const auto& c : conditions) {
        if (c.verdict == Verdict::Fail) return Verdict::Fail;
        if (c.verdict == Verdict::Inconclusive) inconclusive = true;
    }
    return inconclusive ? Verdict::Inconclusive : Verdict::Pass;
}

const ConditionResult* ExistenceReport::find(std::string_view id) const {
    for (const auto& c : conditions)
        if (c.condition_id == id) return &c;
    return nullptr;
}

namespace {

bool sequence_nonnegative(const SequenceMap& s, std::span<const double> y) {
    const double amp = s.amp(y);
    if (amp == 0.0) return true;
    if (s.kind == SequenceMap::Kind::Finite)
        return std::all_of(s.values.begin(), s.values.end(), [amp](double v) { return amp * v >= 0.0; });
    return amp > 0.0 && s.rate(y) >= 0.0;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : kInf; }

}  // namespace

ExistenceQuantities existence_quantities(const CoefficientModel& model, std::span<const double> y,
                                         const Truncation& truncation) {
    ExistenceQuantities q;
    const std::size_t horizon = series_horizon(truncation.m);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                q.finite = m.c.summable_at(y);
                q.as_constraint = m.c.kind == SequenceMap::Kind::Finite ? 0.0 : std::abs(m.c.rate(y));
                q.expectation_term = q.finite ? m.c.l2_sq(y) : kInf;
            } else if constexpr (std::is_same_v<T, DsvStarModel>) {
                const double c0 = m.constant(y);
                q.expectation_term = c0 * c0;
                for (const auto& t : m.terms) q.expectation_term += t.value(y) * t.value(y);
            } else if constexpr (std::is_same_v<T, DsulbsModel>) {
                q.finite = m.c.summable_at(y);
                q.as_constraint = m.c.kind == SequenceMap::Kind::Finite ? 0.0 : std::abs(m.c.rate(y));
                q.expectation_term = q.finite ? m.c.l1_norm(y) : kInf;
            } else if constexpr (std::is_same_v<T, BilinearModel> || std::is_same_v<T, LarchModel>) {
                const BilinearForm f = bilinear_form(model, y, horizon);
                q.as_constraint = f.converged ? f.h_sq : kInf;
                q.finite = q.as_constraint < 1.0;
                q.expectation_term = q.finite ? f.centered_mass() : kInf;
            } else if constexpr (std::is_same_v<T, ArchModel>) {
                q.nonnegative = m.b0(y) >= 0.0 && sequence_nonnegative(m.b, y);
                const BilinearForm f = bilinear_form(model, y, horizon);
                q.as_constraint = m.lambda1 * f.b_sum;
                q.as_constraint2 = f.converged ? f.h_sq : kInf;
                q.finite = q.as_constraint < 1.0 && q.as_constraint2 < 1.0;
                const double b0 = m.b0(y);
                const double d = 1.0 - q.as_constraint;
                q.expectation_term = q.finite ? safe_ratio(b0 * b0, d * d * (1.0 - q.as_constraint2)) : kInf;
            } else if constexpr (std::is_same_v<T, Garch11Model>) {
                const auto o = ArchOrthogonalization::from_moments(m.lambda1, m.lambda2);
                const double a0 = m.alpha0(y), a = m.alpha(y), be = m.beta(y);
                q.nonnegative = a0 >= 0.0 && a >= 0.0 && be >= 0.0;
                const double rho = o.lambda1 * a + be;
                const double extra = o.lambda1 * o.lambda1 * o.kappa * o.kappa * a * a;
                q.as_constraint = rho * rho + extra;
                q.finite = q.as_constraint < 1.0 && be < 1.0;
                q.expectation_term =
                    q.finite ? safe_ratio(a0 * a0, (1.0 - rho) * (1.0 - rho) * (1.0 - q.as_constraint)) : kInf;
            } else if constexpr (std::is_same_v<T, Arch1Model>) {
                const double a0 = m.alpha0(y), a = m.alpha(y);
                q.nonnegative = a0 >= 0.0 && a >= 0.0;
                if (!(m.lambda1 > 0.0) || m.lambda2 < m.lambda1 * m.lambda1)
                    throw ConfigError("ARCH(1) innovation moments are inconsistent");
                q.as_constraint = std::sqrt(m.lambda2) * a;
                q.finite = q.as_constraint < 1.0;
                const double d = 1.0 - m.lambda1 * a;
                q.expectation_term =
                    q.finite ? safe_ratio(a0 * a0, d * d * (1.0 - m.lambda2 * a * a)) : kInf;
            }
        },
        model);
    return q;
}

namespace {

struct ConditionPlan {
    std::string id;
    std::string description;
    enum class Kind { Nonnegative, Constraint1, Constraint2, Summable, Expectation } kind;
};

std::vector<ConditionPlan> plan_for(ModelTag tag) {
    using K = ConditionPlan::Kind;
    switch (tag) {
        case ModelTag::LarchInf:
            return {{"larch.b2_lt_1", "B2(y) = sum b_k^2 < 1 a.s.", K::Constraint1},
                    {"larch.finite_second_moment", "E[b0^2 / (1 - B2)] < inf", K::Expectation}};
        case ModelTag::Bilinear:
            return {{"bilinear.h_lt_1", "H(y) = sum h_l^2 < 1 a.s.", K::Constraint1},
                    {"bilinear.finite_second_moment", "E[b0^2 G / (1 - H)] < inf", K::Expectation}};
        case ModelTag::ArchInf:
            return {{"arch.nonnegative", "b0(y), b_k(y) >= 0", K::Nonnegative},
                    {"arch.lambda1_b_lt_1", "lambda1 B(y) < 1 a.s.", K::Constraint1},
                    {"arch.h_lt_1", "H(y) < 1 a.s.", K::Constraint2},
                    {"arch.finite_second_moment", "E[b0^2 / ((1 - lambda1 B)^2 (1 - H))] < inf", K::Expectation}};
        case ModelTag::Garch11:
            return {{"garch11.nonnegative", "alpha0, alpha, beta >= 0", K::Nonnegative},
                    {"garch11.rho2_plus_lt_1", "rho^2 + lambda1^2 kappa^2 alpha^2 < 1 a.s.", K::Constraint1},
                    {"garch11.finite_second_moment",
                     "E[alpha0^2 / ((1 - rho)^2 (1 - rho^2 - lambda1^2 kappa^2 alpha^2))] < inf", K::Expectation}};
        case ModelTag::Arch1:
            return {{"arch1.nonnegative", "alpha0, alpha >= 0", K::Nonnegative},
                    {"arch1.sqrt_lambda2_alpha_lt_1", "sqrt(lambda2) alpha < 1 a.s.", K::Constraint1},
                    {"arch1.finite_second_moment",
                     "E[alpha0^2 / ((1 - lambda1 alpha)^2 (1 - lambda2 alpha^2))] < inf", K::Expectation}};
        case ModelTag::Linear:
        case ModelTag::DSVStar:
            return {{"c2.summable", "coefficients square summable a.s.", K::Summable},
                    {"c2.finite_l2", "E[||c(y)||_2^2] < inf", K::Expectation}};
        case ModelTag::DSULBS:
            return {{"dsulbs.summable", "Lipschitz coefficients summable a.s.", K::Summable},
                    {"dsulbs.finite_l1", "E[||a(y)||_1] < inf", K::Expectation}};
    }
    throw ConfigError("model tag has no associated condition set");
}

}  // namespace

ExistenceReport check_existence(const CoefficientModel& model, const EnvironmentSpec& env,
                                std::uint64_t seed, const CheckOptions& options) {
    if (options.mc_samples == 0) throw ContractError("check_existence: mc_samples must be positive");
    const auto plan = plan_for(tag_of(model));
    const EnvironmentDraw draw = sample_environment(env, options.mc_samples, seed);
    std::vector<ExistenceQuantities> q(draw.n);
    parallel_for(draw.n, [&](std::size_t i) { q[i] = existence_quantities(model, draw.at(i), options.truncation); });

    ExistenceReport rep;
    rep.model = tag_of(model);
    rep.mc_samples = draw.n;
    std::size_t any_violation = 0;
    for (const auto& e : q)
        if (!e.finite || !e.nonnegative) ++any_violation;

    for (const auto& p : plan) {
        ConditionResult r;
        r.condition_id = p.id;
        r.description = p.description;
        using K = ConditionPlan::Kind;
        if (p.kind == K::Expectation) {
            if (any_violation > 0) {
                r.verdict = Verdict::Fail;
                r.estimate = kInf;
                r.violation_fraction = static_cast<double>(any_violation) / static_cast<double>(draw.n);
            } else {
                std::vector<double> terms;
                terms.reserve(q.size());
                for (const auto& e : q) terms.push_back(e.expectation_term);
                const auto ms = mean_se(terms);
                r.estimate = ms.mean;
                r.stderr_ = ms.se;
                if (!std::isfinite(ms.mean)) r.verdict = Verdict::Fail;
                else if (ms.mean > 0.0 && ms.se > options.max_relative_se * ms.mean) r.verdict = Verdict::Inconclusive;
                else r.verdict = Verdict::Pass;
            }
        } else {
            std::size_t bad = 0;
            double worst = -kInf;
            for (const auto& e : q) {
                double v = 0.0;
                bool violated = false;
                switch (p.kind) {
                    case K::Nonnegative:
                        v = e.nonnegative ? 0.0 : 1.0;
                        violated = !e.nonnegative;
                        break;
                    case K::Constraint1:
                        v = e.as_constraint;
                        violated = !(v < 1.0);
                        break;
                    case K::Constraint2:
                        v = e.as_constraint2;
                        violated = !(v < 1.0);
                        break;
                    case K::Summable:
                        v = e.as_constraint;
                        violated = !e.finite;
                        break;
                    case K::Expectation:
                        break;
                }
                worst = std::max(worst, v);
                if (violated) ++bad;
            }
            r.estimate = worst;
            r.violation_fraction = static_cast<double>(bad) / static_cast<double>(draw.n);
            r.verdict = bad > 0 ? Verdict::Fail : Verdict::Pass;
        }
        rep.conditions.push_back(std::move(r));
    }
    return rep;
}

double dependence_weight(const CoefficientModel& model, std::span<const double> y,
                         const Truncation& truncation, double innovation_bound) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DsulbsModel>) {
                return dsulbs_lipschitz(m, y, truncation.m, innovation_bound).l1();
            } else if constexpr (std::is_same_v<T, LinearModel>) {
                return m.c.summable_at(y) ? std::sqrt(m.c.l2_sq(y)) : kInf;
            } else if constexpr (std::is_same_v<T, DsvStarModel>) {
                // the order-0 constant is removed by centering and carries no dependence
                double s = 0.0;
                for (const auto& t : m.terms) s += t.value(y) * t.value(y);
                return std::sqrt(s);
            } else {
                const BilinearForm f = bilinear_form(model, y, series_horizon(truncation.m));
                return std::sqrt(f.centered_mass());
            }
        },
        model);
}

ScalarEstimate check_k5(const CoefficientModel& model, const EnvironmentSpec& env,
                        std::size_t mc_samples, std::uint64_t seed, const Truncation& truncation,
                        double innovation_bound) {
    if (mc_samples == 0) throw ContractError("check_k5: mc_samples must be positive");
    const EnvironmentDraw draw = sample_environment(env, mc_samples, seed, 1);
    std::vector<double> v(draw.n);
    parallel_for(draw.n, [&](std::size_t i) {
        v[i] = dependence_weight(model, draw.at(i), truncation, innovation_bound);
    });
    const auto ms = mean_se(v);
    return {ms.mean, ms.se};
}

MomentReport check_moment_k2delta(const CoefficientModel& model, const EnvironmentSpec& env,
                                  const InnovationGeneratorSpec& innovations, double delta,
                                  std::size_t mc_samples, std::uint64_t seed,
                                  const Truncation& truncation) {
    if (!(delta > 0.0)) throw ContractError("check_moment_k2delta: delta must be positive");
    if (mc_samples == 0) throw ContractError("check_moment_k2delta: mc_samples must be positive");
    const std::size_t clusters = std::min<std::size_t>(200, mc_samples);
    const std::size_t per = std::max<std::size_t>(1, mc_samples / clusters);
    const PanelGenerator gen(innovations, 1);
    const double power = 2.0 + delta;
    const double bound = innovations.bound();

    std::vector<double> cluster_mean(clusters, 0.0);
    parallel_for(clusters, [&](std::size_t c) {
        const EnvironmentDraw d = sample_environment(env, 1, seed, 2 + c);
        const auto y = d.at(0);
        const long T = static_cast<long>(per);
        std::vector<double> z;
        const std::uint64_t eps_seed = derive_seed(seed, "k2delta.eps", c);
        if (const auto* ds = std::get_if<DsulbsModel>(&model)) {
            const int w = truncation.m;
            const auto panel = gen.generate(-w, T + w, eps_seed);
            z = simulate_dsulbs(*ds, y, panel.row(0), 0, T, truncation.m, bound);
        } else {
            const ChaosCoefficients cc = volterra_coefficients(model, y, truncation);
            const auto panel = gen.generate(-cc.lag_hi, T - cc.lag_lo, eps_seed);
            z = evaluate_chaos(cc, panel.row(0), 0, T);
        }
        double acc = 0.0;
        for (double v : z) acc += std::pow(std::abs(v), power);
        cluster_mean[c] = acc / static_cast<double>(z.size());
    });

    MomentReport rep;
    rep.delta = delta;
    const auto full = mean_se(cluster_mean);
    rep.estimate = full.mean;
    rep.stderr_ = full.se;
    const std::size_t half_n = std::max<std::size_t>(1, clusters / 2);
    const auto half = mean_se(std::span<const double>(cluster_mean.data(), half_n));
    rep.half_sample_estimate = half.mean;
    rep.half_sample_stderr = half.se;
    const double pooled = std::sqrt(full.se * full.se + half.se * half.se);
    rep.heavy_tailed = std::abs(full.mean - half.mean) > 3.0 * pooled && pooled > 0.0;
    for (std::size_t frac : {8u, 4u, 2u, 1u}) {
        const std::size_t k = std::max<std::size_t>(1, clusters / frac);
        const auto part = mean_se(std::span<const double>(cluster_mean.data(), k));
        rep.stability_curve.emplace_back(k * per, part.mean);
    }
    return rep;
}

}  // namespace dsagg
