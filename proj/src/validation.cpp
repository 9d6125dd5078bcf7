#include "dsagg/validation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "dsagg/errors.hpp"
#include "dsagg/parallel.hpp"
#include "dsagg/recursive.hpp"
#include "dsagg/rng.hpp"

namespace dsagg {

double truncate(double z, double T) { return std::clamp(z, -T, T); }

TruncationMomentResult truncation_moment_check(std::span<const double> samples, double T, double k,
                                               double m) {
    if (!(T > 0.0) || !(k >= 1.0) || !(m > k))
        throw ContractError("truncation_moment_check needs T > 0 and m > k >= 1");
    if (samples.size() < 2) throw ContractError("truncation_moment_check needs at least two samples");
    const double n = static_cast<double>(samples.size());
    const double scale = 2.0 * std::pow(T, -(m - k));
    double lhs = 0.0, rhs = 0.0, d_mean = 0.0, d_m2 = 0.0;
    std::size_t count = 0;
    for (double z : samples) {
        const double a = std::pow(std::abs(z - truncate(z, T)), k);
        const double b = scale * std::pow(std::abs(z), m);
        lhs += a;
        rhs += b;
        // Welford on the paired difference
        ++count;
        const double d = a - b;
        const double delta = d - d_mean;
        d_mean += delta / static_cast<double>(count);
        d_m2 += delta * (d - d_mean);
    }
    TruncationMomentResult r;
    r.lhs = lhs / n;
    r.rhs = rhs / n;
    r.diff_stderr = std::sqrt(d_m2 / (n - 1.0) / n);
    r.pass = r.lhs <= r.rhs + 3.0 * r.diff_stderr;
    return r;
}

namespace {

std::size_t floor_power(std::size_t n, double e) {
    // the nudge keeps exact powers such as 100^0.5 from landing just below the integer
    return static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), e) + 1e-9));
}

}  // namespace

BlockScheme bernstein_blocks(std::size_t n, double alpha, double beta) {
    if (!(0.0 < beta && beta < alpha && alpha < 1.0))
        throw ContractError("bernstein_blocks needs 0 < beta < alpha < 1");
    BlockScheme s;
    s.n = n;
    s.alpha = alpha;
    s.beta = beta;
    s.p = floor_power(n, alpha);
    s.q = floor_power(n, beta);
    if (s.q == 0 || s.p + s.q > n) throw DomainError("degenerate block scheme: p + q exceeds N");
    s.r = n / (s.p + s.q);
    std::size_t next = 1;
    for (std::size_t m = 0; m < s.r; ++m) {
        s.big.push_back({next, next + s.p - 1});
        next += s.p;
        const std::size_t last = m + 1 == s.r ? n : next + s.q - 1;
        s.small.push_back({next, last});
        next = last + 1;
    }
    return s;
}

ExponentWindow clt_exponent_window(double delta, double decay, WeakDepFamily family) {
    if (!(delta > 0.0) || !(decay > 0.0)) throw ContractError("exponent window needs delta > 0, decay > 0");
    ExponentWindow w;
    w.family = family;
    w.delta = delta;
    w.decay = decay;
    w.alpha_max = delta / (2.0 * (1.0 + delta));
    const bool kappa = family == WeakDepFamily::Kappa || family == WeakDepFamily::KappaPrime;
    w.offset = kappa ? (3.0 * delta + 2.0) / (2.0 * (1.0 + delta)) : 1.5;
    w.threshold = kappa ? 2.0 + 2.0 / delta : 2.0 + 3.0 / delta;
    // beta < alpha and offset - decay beta < alpha meet iff alpha > offset / (decay + 1)
    const double alpha_min = w.offset / (decay + 1.0);
    w.empty = !(alpha_min < w.alpha_max);
    if (!w.empty) {
        w.alpha = 0.5 * (alpha_min + w.alpha_max);
        const double beta_min = std::max(0.0, (w.offset - w.alpha) / decay);
        w.beta = 0.5 * (beta_min + w.alpha);
    }
    return w;
}

bool in_exponent_window(const ExponentWindow& w, double alpha, double beta) {
    return 0.0 < beta && beta < alpha && alpha < w.alpha_max && w.offset - w.decay * beta < alpha;
}

// ---- test functions ---------------------------------------------------------------------------

TestFunctionDictionary TestFunctionDictionary::standard() {
    TestFunctionDictionary d;
    for (std::size_t u = 1; u <= 3; ++u) {
        const double inv = 1.0 / static_cast<double>(u);
        const std::string tag = "/" + std::to_string(u);
        auto mean = [u](std::span<const double> x) {
            double s = 0.0;
            for (std::size_t q = 0; q < u; ++q) s += x[q];
            return s / static_cast<double>(u);
        };
        d.add({"clip_x1" + tag, u, 1.0, [](std::span<const double> x) { return truncate(x[0], 1.0); }});
        d.add({"clip_half_x1" + tag, u, 0.5,
               [](std::span<const double> x) { return truncate(0.5 * x[0], 1.0); }});
        d.add({"clip_mean" + tag, u, inv, [mean](std::span<const double> x) { return truncate(mean(x), 1.0); }});
        d.add({"sin_mean" + tag, u, inv, [mean](std::span<const double> x) { return std::sin(mean(x)); }});
        if (u >= 2) {
            d.add({"clip_sum" + tag, u, 1.0, [u](std::span<const double> x) {
                       double s = 0.0;
                       for (std::size_t q = 0; q < u; ++q) s += x[q];
                       return truncate(s, 1.0);
                   }});
            d.add({"clip_product" + tag, u, 1.0, [](std::span<const double> x) {
                       return truncate(x[0], 1.0) * truncate(x[1], 1.0);
                   }});
        }
    }
    d.certify();
    return d;
}

void TestFunctionDictionary::add(TestFunction f) {
    f.certified = false;
    members_.push_back(std::move(f));
}

std::size_t TestFunctionDictionary::certify(double box, std::size_t grid, std::uint64_t seed) {
    std::size_t failed = 0;
    for (auto& f : members_) {
        const std::size_t a = f.arity;
        std::size_t total = 1;
        for (std::size_t q = 0; q < a; ++q) total *= grid;
        std::vector<std::vector<double>> pts(total, std::vector<double>(a));
        for (std::size_t p = 0; p < total; ++p) {
            std::size_t rest = p;
            for (std::size_t q = 0; q < a; ++q) {
                pts[p][q] = -box + 2.0 * box * static_cast<double>(rest % grid) / static_cast<double>(grid - 1);
                rest /= grid;
            }
        }
        // random close pairs probe the local slope the coarse grid can miss
        Rng rng = make_rng(seed, "certify." + f.name, 0);
        std::uniform_real_distribution<double> unif(-box, box), tiny(-1e-3, 1e-3);
        std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
        for (int t = 0; t < 2000; ++t) {
            std::vector<double> x(a), y(a);
            for (std::size_t q = 0; q < a; ++q) {
                x[q] = unif(rng);
                y[q] = x[q] + tiny(rng);
            }
            pairs.emplace_back(std::move(x), std::move(y));
        }
        std::vector<double> vals(total);
        bool ok = true;
        for (std::size_t p = 0; p < total; ++p) {
            vals[p] = f.fn(pts[p]);
            if (!(std::abs(vals[p]) <= 1.0 + 1e-12)) ok = false;
        }
        const double lip = f.lipschitz * (1.0 + 1e-9) + 1e-12;
        auto check = [&](const std::vector<double>& x, const std::vector<double>& y, double fx, double fy) {
            double d = 0.0;
            for (std::size_t q = 0; q < a; ++q) d += std::abs(x[q] - y[q]);
            if (d > 0.0 && std::abs(fx - fy) > lip * d) ok = false;
        };
        for (std::size_t p = 0; p < total && ok; ++p)
            for (std::size_t q = p + 1; q < total; ++q) check(pts[p], pts[q], vals[p], vals[q]);
        for (const auto& [x, y] : pairs) check(x, y, f.fn(x), f.fn(y));
        f.certified = ok;
        if (!ok) ++failed;
    }
    return failed;
}

long ProbeTemplate::gap() const {
    if (i.empty() || j.empty()) throw ContractError("probe template needs nonempty blocks");
    return static_cast<long>(*std::min_element(j.begin(), j.end())) -
           static_cast<long>(*std::max_element(i.begin(), i.end()));
}

bool ProbeReport::pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const ProbeEntry& e) { return e.pass; });
}

namespace {

struct CovStat {
    double cov = 0.0;
    double se = 0.0;
};

CovStat covariance(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    if (n < 2) throw ContractError("covariance needs at least two replicates");
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double p = (a[r] - ma) * (b[r] - mb);
        s += p;
        s2 += p * p;
    }
    const double nn = static_cast<double>(n);
    const double mean = s / nn;
    const double var = std::max(0.0, (s2 - nn * mean * mean) / (nn - 1.0));
    return {s / (nn - 1.0), std::sqrt(var / nn)};
}

bool kappa_type(WeakDepFamily f) { return f == WeakDepFamily::Kappa || f == WeakDepFamily::KappaPrime; }

}  // namespace

ProbeReport dependence_probe(std::span<const double> samples, std::size_t units,
                             const TestFunctionDictionary& dictionary, const ProbeTemplate& probe,
                             const DependenceProfile& profile, std::span<const double> weights) {
    if (units == 0 || samples.size() % units != 0) throw ContractError("probe samples must be replicates x units");
    if (probe.i.size() > 3 || probe.j.size() > 3) throw ContractError("probe blocks hold at most 3 indices");
    for (std::size_t idx : probe.i)
        if (idx >= units) throw IndexError("probe index beyond the panel");
    for (std::size_t idx : probe.j)
        if (idx >= units) throw IndexError("probe index beyond the panel");
    if (!weights.empty() && weights.size() < units) throw ContractError("one weight per unit is required");
    for (const auto& f : dictionary.members())
        if (!f.certified) throw ContractError("dictionary member '" + f.name + "' has no certified Lipschitz constant");

    const std::size_t reps = samples.size() / units;
    ProbeReport rep;
    rep.gap = probe.gap();
    if (rep.gap < 1) throw ContractError("probe blocks must be ordered with a positive gap");
    rep.epsilon = profile.at(rep.gap);
    auto weight_sum = [&](const std::vector<std::size_t>& block) {
        double s = 0.0;
        for (std::size_t idx : block) s += weights.empty() ? 1.0 : weights[idx];
        return s;
    };
    const double du = weight_sum(probe.i), dv = weight_sum(probe.j);

    auto apply = [&](const TestFunction& f, const std::vector<std::size_t>& block) {
        std::vector<double> out(reps), x(block.size());
        for (std::size_t r = 0; r < reps; ++r) {
            for (std::size_t q = 0; q < block.size(); ++q) x[q] = samples[r * units + block[q]];
            out[r] = f.fn(x);
        }
        return out;
    };
    std::vector<const TestFunction*> fs, gs;
    for (const auto& f : dictionary.members()) {
        if (f.arity == probe.i.size()) fs.push_back(&f);
        if (f.arity == probe.j.size()) gs.push_back(&f);
    }
    std::vector<std::vector<double>> fv, gv;
    for (const auto* f : fs) fv.push_back(apply(*f, probe.i));
    for (const auto* g : gs) gv.push_back(apply(*g, probe.j));
    for (std::size_t a = 0; a < fs.size(); ++a) {
        for (std::size_t b = 0; b < gs.size(); ++b) {
            const CovStat c = covariance(fv[a], gv[b]);
            ProbeEntry e;
            e.f = fs[a]->name;
            e.g = gs[b]->name;
            e.cov = c.cov;
            e.stderr_ = c.se;
            const double ps = psi(profile.family, du, dv, fs[a]->lipschitz, gs[b]->lipschitz);
            e.bound = ps * rep.epsilon;
            e.zero_bound = e.bound == 0.0;
            e.margin = e.bound + 3.0 * e.stderr_ - std::abs(e.cov);
            e.pass = e.margin >= 0.0;
            if (ps > 0.0) rep.coefficient_lower_bound = std::max(rep.coefficient_lower_bound, std::abs(e.cov) / ps);
            rep.entries.push_back(std::move(e));
        }
    }
    return rep;
}

CovarianceBoundResult covariance_bound_check(std::span<const double> zi, std::span<const double> zj,
                                             std::size_t i, std::size_t j,
                                             const DependenceProfile& profile, double delta,
                                             double moment_2delta, double ev) {
    if (i == j) throw ContractError("covariance_bound_check covers cross terms only (i != j)");
    if (zi.size() != zj.size()) throw ContractError("paired samples must have equal length");
    if (!(delta > 0.0)) throw ContractError("delta must be positive");
    const CovStat c = covariance(zi, zj);
    CovarianceBoundResult r;
    r.cov = c.cov;
    r.stderr_ = c.se;
    r.constant = 6.0 * moment_2delta + 2.0 * (ev + ev * ev);
    const double eps = profile.at(static_cast<long>(i > j ? i - j : j - i));
    r.decay = kappa_type(profile.family) ? eps : std::pow(eps, delta / (1.0 + delta));
    r.bound = r.constant * r.decay;
    r.margin = r.bound + 3.0 * r.stderr_ - std::abs(r.cov);
    r.pass = r.margin >= 0.0;
    return r;
}

// ---- normality --------------------------------------------------------------------------------

double kolmogorov_survival(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 1.18) {
        // theta-function form converges fast for small x
        const double pi2 = std::numbers::pi * std::numbers::pi;
        double cdf = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double j = 2.0 * k - 1.0;
            cdf += std::exp(-j * j * pi2 / (8.0 * x * x));
        }
        cdf *= std::sqrt(2.0 * std::numbers::pi) / x;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-300) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

NormalityReport normality_test(std::span<const double> samples, double target_variance,
                               std::string target_source, std::span<const double> cf_grid) {
    if (!(target_variance > 0.0)) throw DomainError("normality_test needs a positive target variance");
    if (samples.size() < 100) throw ContractError("normality_test needs at least 100 samples");
    NormalityReport r;
    r.n = samples.size();
    r.target_variance = target_variance;
    r.target_source = std::move(target_source);
    const double sd = std::sqrt(target_variance);
    std::vector<double> z(samples.begin(), samples.end());
    for (double& v : z) v /= sd;
    std::sort(z.begin(), z.end());
    const double n = static_cast<double>(r.n);
    const boost::math::normal_distribution<double> std_normal;
    double d = 0.0;
    for (std::size_t i = 0; i < r.n; ++i) {
        const double f = boost::math::cdf(std_normal, z[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    r.ks = d;
    const double rn = std::sqrt(n);
    r.p_value = kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d);

    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : z) {
        const double c = v - mean;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    r.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    r.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : -3.0;
    r.skew_stderr = std::sqrt(6.0 / n);
    r.kurt_stderr = std::sqrt(24.0 / n);

    r.qq.reserve(r.n);
    for (std::size_t i = 0; i < r.n; ++i)
        r.qq.emplace_back(boost::math::quantile(std_normal, (static_cast<double>(i) + 0.5) / n), z[i]);

    if (cf_grid.empty()) {
        r.cf_distance = std::numeric_limits<double>::quiet_NaN();
    } else {
        for (double x : cf_grid) {
            double re = 0.0, im = 0.0;
            for (double v : z) {
                re += std::cos(x * v);
                im += std::sin(x * v);
            }
            const std::complex<double> emp(re / n, im / n);
            r.cf_distance = std::max(r.cf_distance, std::abs(emp - std::exp(-0.5 * x * x)));
        }
    }
    return r;
}

// ---- experiments ------------------------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

CltResult run_clt_experiment(const CltConfig& cfg) {
    if (cfg.n_grid.empty() || cfg.time_points.empty()) throw ConfigError("clt: empty N grid or time points");
    if (!cfg.combination.empty() && cfg.combination.size() != cfg.time_points.size())
        throw ConfigError("clt: combination weights must match the time points");
    if (tag_of(cfg.model) == ModelTag::DSULBS) throw ContractError("clt: DSULBS models have no Gamma decomposition");
    const InteractionKernel kernel = theoretical_chi(cfg.innovations);
    const std::size_t n_max = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
    const long t_lo = *std::min_element(cfg.time_points.begin(), cfg.time_points.end());
    const long t_hi = *std::max_element(cfg.time_points.begin(), cfg.time_points.end()) + 1;

    // distinct lag differences needed by the statistics
    std::vector<long> taus{0};
    if (!cfg.combination.empty())
        for (long a : cfg.time_points)
            for (long b : cfg.time_points) taus.push_back(b - a);
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    auto tau_index = [&](long tau) {
        return static_cast<std::size_t>(std::lower_bound(taus.begin(), taus.end(), tau) - taus.begin());
    };
    auto combine = [&](const std::vector<double>& g) {
        double v = 0.0;
        for (std::size_t a = 0; a < cfg.time_points.size(); ++a)
            for (std::size_t b = 0; b < cfg.time_points.size(); ++b)
                v += cfg.combination[a] * cfg.combination[b] * g[tau_index(cfg.time_points[b] - cfg.time_points[a])];
        return v;
    };

    CltResult res;
    std::vector<double> limit(taus.size());
    for (std::size_t q = 0; q < taus.size(); ++q)
        limit[q] = gamma_limit(cfg.model, cfg.env, kernel, taus[q], cfg.truncation, cfg.limit_mc_samples,
                               derive_seed(cfg.seed, "clt.limit", 0))
                       .value;
    res.gamma0 = limit[tau_index(0)];
    const double combo_limit = cfg.combination.empty() ? 0.0 : combine(limit);

    for (std::size_t e = 0; e < cfg.env_seeds; ++e) {
        const EnvironmentDraw full = sample_environment(cfg.env, n_max, derive_seed(cfg.seed, "clt.env", e));
        const auto coeffs = unit_coefficients(cfg.model, full, cfg.truncation);
        int lag_lo = 0, lag_hi = 0;
        for (const auto& c : coeffs) {
            lag_lo = std::min(lag_lo, c.lag_lo);
            lag_hi = std::max(lag_hi, c.lag_hi);
        }
        const CoefficientBank bank(coeffs);
        for (std::size_t n : cfg.n_grid) {
            std::vector<double> gn(taus.size());
            for (std::size_t q = 0; q < taus.size(); ++q) gn[q] = gamma_n_exact(bank, n, kernel, taus[q]).value;
            const PanelGenerator gen(cfg.innovations, n);
            const std::size_t stats = cfg.time_points.size() + (cfg.combination.empty() ? 0 : 1);
            std::vector<double> values(cfg.replicates * stats, 0.0);
            const std::uint64_t cell_seed = derive_seed(derive_seed(cfg.seed, "clt.cell", e), "clt.n", n);
            const double b_n = normalization_constant(NormalizationRule::Sqrt, n);
            parallel_for(cfg.replicates, [&](std::size_t r) {
                const InnovationPanel eps = gen.generate(t_lo - lag_hi, t_hi - lag_lo, derive_seed(cell_seed, "replicate", r));
                std::vector<double> x(static_cast<std::size_t>(t_hi - t_lo), 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    const auto z = evaluate_chaos(coeffs[i], eps.row(i), t_lo, t_hi);
                    for (std::size_t c = 0; c < x.size(); ++c) x[c] += z[c];
                }
                double* out = values.data() + r * stats;
                double combo = 0.0;
                for (std::size_t a = 0; a < cfg.time_points.size(); ++a) {
                    const double v = x[static_cast<std::size_t>(cfg.time_points[a] - t_lo)] / b_n;
                    out[a] = v;
                    if (!cfg.combination.empty()) combo += cfg.combination[a] * v;
                }
                if (!cfg.combination.empty()) out[cfg.time_points.size()] = combo;
            });
            for (std::size_t st = 0; st < stats; ++st) {
                std::vector<double> sample(cfg.replicates);
                for (std::size_t r = 0; r < cfg.replicates; ++r) sample[r] = values[r * stats + st];
                CltCell cell;
                cell.n = n;
                cell.env_seed = e;
                const bool is_combo = st == cfg.time_points.size();
                cell.statistic = is_combo ? "combination" : "t=" + std::to_string(cfg.time_points[st]);
                cell.gamma_n = is_combo ? combine(gn) : gn[tau_index(0)];
                cell.vs_limit = normality_test(sample, is_combo ? combo_limit : res.gamma0, "limit", cfg.cf_grid);
                cell.vs_exact = normality_test(sample, cell.gamma_n, "exact", cfg.cf_grid);
                res.cells.push_back(std::move(cell));
            }
        }
    }
    for (std::size_t n : cfg.n_grid) {
        std::vector<double> ks, p, ke;
        for (const auto& c : res.cells) {
            if (c.n != n) continue;
            ks.push_back(c.vs_limit.ks);
            p.push_back(c.vs_limit.p_value);
            ke.push_back(c.vs_exact.ks);
        }
        res.median_ks.emplace_back(n, median(ks));
        res.median_p.emplace_back(n, median(p));
        res.median_ks_exact.emplace_back(n, median(ke));
    }
    res.trend_ok = true;
    for (std::size_t q = 1; q < res.median_ks.size(); ++q)
        if (res.median_ks[q].second > res.median_ks[q - 1].second) res.trend_ok = false;
    return res;
}

SllnResult run_slln_experiment(const SllnConfig& cfg) {
    if (cfg.n_grid.empty() || cfg.taus.empty()) throw ConfigError("slln: empty N grid or tau list");
    if (tag_of(cfg.model) == ModelTag::DSULBS) throw ContractError("slln: DSULBS models have no Gamma decomposition");
    const InteractionKernel kernel = make_kernel(cfg.kernel);
    const std::size_t n_max = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
    SllnResult res;
    for (long tau : cfg.taus)
        res.limits.push_back(gamma_limit(cfg.model, cfg.env, kernel, tau, cfg.truncation, cfg.limit_mc_samples,
                                         derive_seed(cfg.seed, "slln.limit", 0)));
    for (long tau : cfg.taus)
        for (std::size_t n : cfg.n_grid) res.rows.push_back({n, tau, 0.0, {}});
    GammaNOptions opt;
    opt.band_tolerance = cfg.band_tolerance;
    for (std::size_t e = 0; e < cfg.env_seeds; ++e) {
        // nested draws: each N uses the first N units of one environment sequence
        const EnvironmentDraw full = sample_environment(cfg.env, n_max, derive_seed(cfg.seed, "slln.env", e));
        const auto coeffs = unit_coefficients(cfg.model, full, cfg.truncation);
        const CoefficientBank bank(coeffs);
        std::size_t row = 0;
        for (long tau : cfg.taus)
            for (std::size_t n : cfg.n_grid) res.rows[row++].gamma_n.push_back(gamma_n_exact(bank, n, kernel, tau, opt).value);
    }
    res.exact = true;
    res.monotone = true;
    std::size_t row = 0;
    for (std::size_t q = 0; q < cfg.taus.size(); ++q) {
        const double lim = res.limits[q].value;
        double prev = std::numeric_limits<double>::infinity();
        double first = 0.0, last = 0.0;
        for (std::size_t a = 0; a < cfg.n_grid.size(); ++a, ++row) {
            std::vector<double> diffs;
            for (double g : res.rows[row].gamma_n) {
                diffs.push_back(std::abs(g - lim));
                if (g != lim) res.exact = false;
            }
            const double m = median(diffs);
            res.rows[row].median_abs_diff = m;
            if (m > prev) res.monotone = false;
            prev = m;
            if (a == 0) first = m;
            last = m;
        }
        res.shrink.push_back(last > 0.0 ? first / last : std::numeric_limits<double>::infinity());
    }
    return res;
}

ProbeResult run_probe_experiment(const ProbeConfig& cfg) {
    if (cfg.block == 0 || cfg.block > 3) throw ConfigError("probes: block size must lie in 1..3");
    if (cfg.gaps.empty()) throw ConfigError("probes: no gaps");
    const long max_gap = *std::max_element(cfg.gaps.begin(), cfg.gaps.end());
    if (*std::min_element(cfg.gaps.begin(), cfg.gaps.end()) < 1) throw ConfigError("probes: gaps must be >= 1");
    if (cfg.units < 2 * cfg.block - 1 + static_cast<std::size_t>(max_gap))
        throw ConfigError("probes: units too few for the largest gap");
    const bool dsulbs = tag_of(cfg.model) == ModelTag::DSULBS;
    const double ebound = cfg.innovations.bound();
    const TestFunctionDictionary dict = TestFunctionDictionary::standard();

    ProbeResult res;
    res.profile = dependence_profile(cfg.innovations, static_cast<int>(max_gap) + 1);
    res.moment_2delta = check_moment_k2delta(cfg.model, cfg.env, cfg.innovations, cfg.delta, cfg.moment_samples,
                                             derive_seed(cfg.seed, "probe.moment", 0), cfg.truncation)
                            .estimate;
    res.ev = check_k5(cfg.model, cfg.env, cfg.moment_samples, derive_seed(cfg.seed, "probe.k5", 0), cfg.truncation,
                      ebound)
                 .value;

    const PanelGenerator gen(cfg.innovations, cfg.units);
    struct TrialOut {
        std::vector<ProbeReport> probes;
        std::vector<CovarianceBoundResult> lemma;
    };
    std::vector<TrialOut> out(cfg.trials);
    parallel_for(cfg.trials, [&](std::size_t trial) {
        const EnvironmentDraw draw = sample_environment(cfg.env, cfg.units, derive_seed(cfg.seed, "probe.env", trial));
        std::vector<ChaosCoefficients> coeffs;
        int lag_lo = 0, lag_hi = 0;
        if (dsulbs) {
            const auto& c = std::get<DsulbsModel>(cfg.model).c;
            lag_lo = std::min(0, c.support_lo(cfg.truncation.m));
            lag_hi = std::max(0, c.support_hi(cfg.truncation.m));
        } else {
            for (std::size_t i = 0; i < cfg.units; ++i) {
                coeffs.push_back(volterra_coefficients(cfg.model, draw.at(i), cfg.truncation));
                lag_lo = std::min(lag_lo, coeffs.back().lag_lo);
                lag_hi = std::max(lag_hi, coeffs.back().lag_hi);
            }
        }
        // replicates sit S apart in time, so they share no innovation
        const long S = lag_hi - lag_lo + 1;
        const long R = static_cast<long>(cfg.replicates);
        const InnovationPanel eps = gen.generate(-lag_hi, (R - 1) * S - lag_lo + 1, derive_seed(cfg.seed, "probe.eps", trial));
        std::vector<double> samples(cfg.replicates * cfg.units);
        std::vector<double> weights(cfg.units);
        for (std::size_t i = 0; i < cfg.units; ++i) {
            weights[i] = dependence_weight(cfg.model, draw.at(i), cfg.truncation, ebound);
            for (long r = 0; r < R; ++r) {
                const long t = r * S;
                const auto z = dsulbs ? simulate_dsulbs(std::get<DsulbsModel>(cfg.model), draw.at(i), eps.row(i), t, t + 1,
                                                        cfg.truncation.m, ebound)
                                      : evaluate_chaos(coeffs[i], eps.row(i), t, t + 1);
                samples[static_cast<std::size_t>(r) * cfg.units + i] = z[0];
            }
        }
        for (long gap : cfg.gaps) {
            ProbeTemplate tpl;
            for (std::size_t q = 0; q < cfg.block; ++q) tpl.i.push_back(q);
            for (std::size_t q = 0; q < cfg.block; ++q) tpl.j.push_back(cfg.block - 1 + static_cast<std::size_t>(gap) + q);
            out[trial].probes.push_back(dependence_probe(samples, cfg.units, dict, tpl, res.profile, weights));
            std::vector<double> zi(cfg.replicates), zj(cfg.replicates);
            for (std::size_t r = 0; r < cfg.replicates; ++r) {
                zi[r] = samples[r * cfg.units];
                zj[r] = samples[r * cfg.units + static_cast<std::size_t>(gap)];
            }
            out[trial].lemma.push_back(covariance_bound_check(zi, zj, 0, static_cast<std::size_t>(gap), res.profile,
                                                              cfg.delta, res.moment_2delta, res.ev));
        }
    });
    for (std::size_t g = 0; g < cfg.gaps.size(); ++g) {
        ProbeGapSummary s;
        s.gap = cfg.gaps[g];
        s.epsilon = res.profile.at(s.gap);
        s.beyond_window = s.epsilon == 0.0;
        s.min_margin = std::numeric_limits<double>::infinity();
        s.lemma_min_margin = std::numeric_limits<double>::infinity();
        for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
            for (const auto& e : out[trial].probes[g].entries) {
                ++s.checks;
                if (e.pass) ++s.passes;
                s.min_margin = std::min(s.min_margin, e.margin);
            }
            const auto& l = out[trial].lemma[g];
            ++s.lemma_checks;
            if (l.pass) ++s.lemma_passes;
            s.lemma_min_margin = std::min(s.lemma_min_margin, l.margin);
        }
        if (cfg.trials > 0) {
            s.first_trial = out[0].probes[g];
            s.first_lemma = out[0].lemma[g];
        }
        res.gaps.push_back(std::move(s));
    }
    return res;
}

}  // namespace dsagg
