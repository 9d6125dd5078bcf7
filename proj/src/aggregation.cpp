#include "dsagg/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dsagg/errors.hpp"
#include "dsagg/parallel.hpp"
#include "dsagg/recursive.hpp"

namespace dsagg {

std::vector<ChaosCoefficients> unit_coefficients(const CoefficientModel& model, const EnvironmentDraw& draw,
                                                 const Truncation& truncation) {
    std::vector<ChaosCoefficients> out(draw.n);
    parallel_for(draw.n, [&](std::size_t i) { out[i] = volterra_coefficients(model, draw.at(i), truncation); });
    return out;
}

ElementaryPanel evaluate_panel(const CoefficientModel& model, const EnvironmentDraw& draw,
                               std::span<const ChaosCoefficients> coeffs, const InnovationPanel& eps,
                               long t_begin, long t_end, const Truncation& truncation,
                               double innovation_bound) {
    if (eps.n < draw.n) throw IndexError("innovation panel has fewer units than the environment draw");
    const bool dsulbs = tag_of(model) == ModelTag::DSULBS;
    if (!dsulbs && coeffs.size() < draw.n) throw ContractError("evaluate_panel: missing unit coefficients");
    ElementaryPanel p;
    p.n = draw.n;
    p.t_min = t_begin;
    p.width = static_cast<std::size_t>(std::max(0L, t_end - t_begin));
    p.values.assign(p.n * p.width, 0.0);
    p.model = tag_of(model);
    p.method = dsulbs ? "dsulbs" : "chaos";
    p.truncation = truncation;
    parallel_for(p.n, [&](std::size_t i) {
        std::vector<double> z;
        if (dsulbs) {
            z = simulate_dsulbs(std::get<DsulbsModel>(model), draw.at(i), eps.row(i), t_begin, t_end,
                                truncation.m, innovation_bound);
        } else {
            z = evaluate_chaos(coeffs[i], eps.row(i), t_begin, t_end);
        }
        std::copy(z.begin(), z.end(), p.values.begin() + static_cast<long>(i * p.width));
    });
    return p;
}

double normalization_constant(NormalizationRule rule, std::size_t n, double custom) {
    switch (rule) {
        case NormalizationRule::Sqrt:
            return std::sqrt(static_cast<double>(n));
        case NormalizationRule::N:
            return static_cast<double>(n);
        case NormalizationRule::Custom:
            if (!(custom > 0.0)) throw ConfigError("custom normalization must be positive");
            return custom;
    }
    return 1.0;
}

AggregatePath aggregate(const ElementaryPanel& panel, NormalizationRule rule, double custom) {
    AggregatePath a;
    a.n = panel.n;
    a.t_min = panel.t_min;
    a.b_n = normalization_constant(rule, panel.n, custom);
    a.x.assign(panel.width, 0.0);
    for (std::size_t c = 0; c < panel.width; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < panel.n; ++i) s += panel.values[i * panel.width + c];
        a.x[c] = s / a.b_n;
    }
    return a;
}

double psi_tau_k(const ChaosCoefficients& ci, const ChaosCoefficients& cj, long tau, int k) {
    const ChaosOrder* oi = ci.order(k);
    const ChaosOrder* oj = cj.order(k);
    if (!oi || !oj) return 0.0;
    std::vector<int> shifted(static_cast<std::size_t>(k));
    double s = 0.0;
    for (std::size_t n = 0; n < oi->size(); ++n) {
        const auto t = oi->tuple(n);
        for (std::size_t q = 0; q < t.size(); ++q) shifted[q] = t[q] + static_cast<int>(tau);
        const long idx = oj->find(shifted);
        if (idx >= 0) s += oi->values[n] * oj->values[static_cast<std::size_t>(idx)];
    }
    return s;
}

namespace {

long find_flat(const std::vector<int>& lags, std::size_t size, std::size_t k, std::span<const int> t) {
    std::size_t lo = 0, hi = size;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const int* c = lags.data() + mid * k;
        if (std::lexicographical_compare(c, c + k, t.begin(), t.end())) lo = mid + 1;
        else hi = mid;
    }
    if (lo < size && std::equal(t.begin(), t.end(), lags.data() + lo * k)) return static_cast<long>(lo);
    return -1;
}

}  // namespace

CoefficientBank::CoefficientBank(std::span<const ChaosCoefficients> units) : units_(units.size()) {
    int top = 0;
    for (const auto& u : units) top = std::max(top, u.max_order());
    for (int k = 1; k <= top; ++k) {
        Order o;
        o.k = k;
        const std::size_t ks = static_cast<std::size_t>(k);
        std::vector<std::vector<int>> all;
        for (const auto& u : units) {
            const ChaosOrder* co = u.order(k);
            if (!co) continue;
            for (std::size_t n = 0; n < co->size(); ++n) {
                const auto t = co->tuple(n);
                all.emplace_back(t.begin(), t.end());
            }
        }
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        o.size = all.size();
        for (const auto& t : all) o.lags.insert(o.lags.end(), t.begin(), t.end());
        o.vals.assign(units_ * o.size, 0.0);
        for (std::size_t i = 0; i < units_; ++i) {
            const ChaosOrder* co = units[i].order(k);
            if (!co) continue;
            for (std::size_t n = 0; n < co->size(); ++n) {
                const long u = find_flat(o.lags, o.size, ks, co->tuple(n));
                o.vals[i * o.size + static_cast<std::size_t>(u)] = co->values[n];
            }
        }
        orders_.push_back(std::move(o));
    }
    for (const auto& u : units) {
        mass_.push_back(u.mass());
        tail_.push_back(u.tail.total());
    }
}

std::vector<std::vector<long>> CoefficientBank::shift_map(long tau) const {
    std::vector<std::vector<long>> out;
    for (const auto& o : orders_) {
        const std::size_t k = static_cast<std::size_t>(o.k);
        std::vector<long> m(o.size, -1);
        std::vector<int> t(k);
        for (std::size_t u = 0; u < o.size; ++u) {
            for (std::size_t q = 0; q < k; ++q) t[q] = o.lags[u * k + q] + static_cast<int>(tau);
            m[u] = find_flat(o.lags, o.size, k, t);
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::span<const double> CoefficientBank::vec(std::size_t i, int k) const {
    const Order& o = orders_[static_cast<std::size_t>(k - 1)];
    return {o.vals.data() + i * o.size, o.size};
}

std::size_t CoefficientBank::order_size(int k) const {
    return k >= 1 && k <= max_order() ? orders_[static_cast<std::size_t>(k - 1)].size : 0;
}

double CoefficientBank::psi_k(std::size_t i, std::size_t j, const std::vector<std::vector<long>>& shift,
                              int k) const {
    if (k < 1 || k > max_order()) return 0.0;
    const Order& o = orders_[static_cast<std::size_t>(k - 1)];
    const std::vector<long>& sm = shift[static_cast<std::size_t>(k - 1)];
    const double* vi = o.vals.data() + i * o.size;
    const double* vj = o.vals.data() + j * o.size;
    double s = 0.0;
    for (std::size_t u = 0; u < o.size; ++u) {
        const long w = sm[u];
        if (w >= 0) s += vi[u] * vj[w];
    }
    return s;
}

GammaNResult gamma_n_exact(const CoefficientBank& bank, std::size_t n, const InteractionKernel& kernel,
                           long tau, const GammaNOptions& options) {
    if (n == 0 || n > bank.units()) throw ContractError("gamma_n_exact: n must lie in [1, units]");
    GammaNResult res;
    long band = -1;
    const long support = kernel.support();
    if (options.banded && support >= 0) {
        band = support;
    } else if (support < 0 && options.band_tolerance > 0.0 && kernel.summable) {
        band = 0;
        while (band + 1 < static_cast<long>(n) && std::abs(kernel.at(band + 1)) >= options.band_tolerance) ++band;
    }
    if (band >= static_cast<long>(n) - 1) band = -1;
    const long reach = band < 0 ? static_cast<long>(n) - 1 : band;
    const double pairs = static_cast<double>(n) * static_cast<double>(2 * reach + 1);
    if (pairs > static_cast<double>(options.pair_budget))
        throw ResourceError("gamma_n_exact: pair count exceeds the budget; enable banding or raise the budget");
    res.band = band;

    std::vector<double> chi(static_cast<std::size_t>(reach + 1));
    chi[0] = 1.0;
    for (long r = 1; r <= reach; ++r) chi[static_cast<std::size_t>(r)] = kernel.at(r);

    const auto shift = bank.shift_map(tau);
    const int top = bank.max_order();
    std::vector<double> row(n, 0.0);
    std::vector<std::size_t> visited(n, 0);
    parallel_for(n, [&](std::size_t i) {
        const long li = static_cast<long>(i);
        const long j0 = std::max(0L, li - reach);
        const long j1 = std::min(static_cast<long>(n) - 1, li + reach);
        double acc = 0.0;
        std::size_t cnt = 0;
        for (long j = j0; j <= j1; ++j) {
            const double c = chi[static_cast<std::size_t>(std::labs(li - j))];
            if (c == 0.0) continue;
            ++cnt;
            double p = 1.0;
            for (int k = 1; k <= top; ++k) {
                p *= c;
                acc += bank.psi_k(i, static_cast<std::size_t>(j), shift, k) * p;
            }
        }
        row[i] = acc;
        visited[i] = cnt;
    });
    // running mean in index order: a constant row reproduces itself exactly
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += (row[i] - mean) / static_cast<double>(i + 1);
        res.pairs += visited[i];
    }
    res.value = mean;

    double max_mass = 0.0, max_tail = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        max_mass = std::max(max_mass, bank.mass(i));
        max_tail = std::max(max_tail, bank.tail(i));
    }
    double l1 = 1.0, dropped = 0.0;
    for (long r = 1; r < static_cast<long>(n); ++r) {
        const double a = 2.0 * std::abs(r <= reach ? chi[static_cast<std::size_t>(r)] : kernel.at(r));
        if (r <= reach) l1 += a;
        else dropped += a;
        if (r > reach && kernel.support() >= 0 && r > kernel.support()) break;
    }
    res.truncation_bound = (max_tail + 2.0 * std::sqrt(max_mass * max_tail)) * (l1 + dropped) + max_mass * dropped;
    return res;
}

GammaNResult gamma_n_exact(const EnvironmentDraw& draw, const CoefficientModel& model,
                           const InteractionKernel& kernel, long tau, const Truncation& truncation,
                           const GammaNOptions& options) {
    const auto coeffs = unit_coefficients(model, draw, truncation);
    const CoefficientBank bank(coeffs);
    return gamma_n_exact(bank, draw.n, kernel, tau, options);
}

namespace {

bool affine_in_y(const CoefficientModel& model) {
    if (const auto* l = std::get_if<LinearModel>(&model)) return l->c.is_affine_in_y();
    return std::holds_alternative<DsvStarModel>(model);
}

double kernel_l1(const InteractionKernel& kernel) {
    if (kernel.nonnegative) return 1.0 + kernel.s_k(1);
    return kernel.l1_partial.empty() ? 1.0 : kernel.l1_partial.back();
}

using TupleMap = std::map<std::vector<int>, double>;

double shifted_dot(const TupleMap& m, long tau) {
    double s = 0.0;
    for (const auto& [t, v] : m) {
        std::vector<int> sh = t;
        for (int& l : sh) l += static_cast<int>(tau);
        const auto it = m.find(sh);
        if (it != m.end()) s += v * it->second;
    }
    return s;
}

}  // namespace

GammaLimit gamma_limit(const CoefficientModel& model, const EnvironmentSpec& env,
                       const InteractionKernel& kernel, long tau, const Truncation& truncation,
                       std::size_t mc_samples, std::uint64_t seed) {
    if (!kernel.summable)
        throw DomainError("gamma_limit: chi is not summable (common innovation case); the limit is not defined");
    env.validate();
    GammaLimit g;
    const std::size_t s = env.dimension();

    auto finish = [&](double tail, double mass) {
        g.value = 0.0;
        for (double v : g.gamma_k) g.value += v;
        for (std::size_t k = 0; k < g.phi_k.size(); ++k) g.value += g.phi_k[k] * kernel.s_k(static_cast<int>(k) + 1);
        g.truncation_bound = (tail + 2.0 * std::sqrt(mass * tail)) * kernel_l1(kernel);
    };

    if (env.family == MarginalFamily::PointMass) {
        g.method = "point_mass";
        std::vector<double> y;
        for (const auto& c : env.coords) y.push_back(c.value);
        std::vector<ChaosCoefficients> one{volterra_coefficients(model, y, truncation)};
        const CoefficientBank bank(one);
        const auto shift = bank.shift_map(tau);
        for (int k = 1; k <= bank.max_order(); ++k) {
            g.gamma_k.push_back(bank.psi_k(0, 0, shift, k));
            g.phi_k.push_back(bank.psi_k(0, 0, shift, k));
        }
        finish(one[0].tail.total(), one[0].mass());
        return g;
    }

    if (affine_in_y(model)) {
        g.method = "exact_moments";
        std::vector<ChaosCoefficients> basis;
        std::vector<double> y(s, 0.0);
        basis.push_back(volterra_coefficients(model, y, truncation));
        for (std::size_t d = 0; d < s; ++d) {
            std::fill(y.begin(), y.end(), 0.0);
            y[d] = 1.0;
            basis.push_back(volterra_coefficients(model, y, truncation));
        }
        const CoefficientBank bank(basis);
        const auto shift = bank.shift_map(tau);
        const auto m = env.mean();
        const auto s2 = env.second_moment();
        for (int k = 1; k <= bank.max_order(); ++k) {
            const std::size_t size = bank.order_size(k);
            const auto b = bank.vec(0, k);
            // slopes D[d][u]
            std::vector<std::vector<double>> dd(s, std::vector<double>(size));
            for (std::size_t d = 0; d < s; ++d) {
                const auto v = bank.vec(d + 1, k);
                for (std::size_t u = 0; u < size; ++u) dd[d][u] = v[u] - b[u];
            }
            std::vector<double> ec(size);
            for (std::size_t u = 0; u < size; ++u) {
                double e = b[u];
                for (std::size_t d = 0; d < s; ++d) e += dd[d][u] * m[d];
                ec[u] = e;
            }
            const auto& sm = shift[static_cast<std::size_t>(k - 1)];
            double gk = 0.0, pk = 0.0;
            for (std::size_t u = 0; u < size; ++u) {
                const long w = sm[u];
                if (w < 0) continue;
                const std::size_t wu = static_cast<std::size_t>(w);
                double cross = b[u] * b[wu];
                for (std::size_t d = 0; d < s; ++d) cross += (b[u] * dd[d][wu] + b[wu] * dd[d][u]) * m[d];
                for (std::size_t d = 0; d < s; ++d)
                    for (std::size_t e = 0; e < s; ++e) cross += dd[d][u] * dd[e][wu] * s2[d * s + e];
                gk += cross;
                pk += ec[u] * ec[wu];
            }
            g.gamma_k.push_back(gk);
            g.phi_k.push_back(pk);
        }
        // tails and masses are quadratic in y; bound them by the largest value over a small sample
        const std::size_t probe = std::min<std::size_t>(64, std::max<std::size_t>(mc_samples, 1));
        const EnvironmentDraw draw = sample_environment(env, probe, seed, 11);
        double tail = 0.0, mass = 0.0;
        for (std::size_t i = 0; i < draw.n; ++i) {
            const auto c = volterra_coefficients(model, draw.at(i), truncation);
            tail = std::max(tail, c.tail.total());
            mass = std::max(mass, c.mass());
        }
        finish(tail, mass);
        return g;
    }

    g.method = "monte_carlo";
    if (mc_samples < 40) throw ContractError("gamma_limit: Monte Carlo needs at least 40 samples");
    constexpr std::size_t kBatches = 20;
    const std::size_t per = mc_samples / kBatches;
    std::vector<std::vector<double>> batch_gamma(kBatches);
    std::vector<std::vector<TupleMap>> batch_mean(kBatches);
    std::vector<double> batch_tail(kBatches, 0.0), batch_mass(kBatches, 0.0);
    int top = 0;
    for (std::size_t b = 0; b < kBatches; ++b) {
        const EnvironmentDraw draw = sample_environment(env, per, seed, 100 + b);
        const auto coeffs = unit_coefficients(model, draw, truncation);
        const CoefficientBank bank(coeffs);
        const auto shift = bank.shift_map(tau);
        top = std::max(top, bank.max_order());
        batch_gamma[b].assign(static_cast<std::size_t>(bank.max_order()), 0.0);
        batch_mean[b].resize(static_cast<std::size_t>(bank.max_order()));
        for (int k = 1; k <= bank.max_order(); ++k) {
            double acc = 0.0;
            for (std::size_t i = 0; i < per; ++i) acc += bank.psi_k(i, i, shift, k);
            batch_gamma[b][static_cast<std::size_t>(k - 1)] = acc / static_cast<double>(per);
        }
        for (std::size_t i = 0; i < per; ++i) {
            batch_tail[b] += coeffs[i].tail.total() / static_cast<double>(per);
            batch_mass[b] += coeffs[i].mass() / static_cast<double>(per);
            for (const auto& o : coeffs[i].orders) {
                auto& mk = batch_mean[b][static_cast<std::size_t>(o.k - 1)];
                for (std::size_t n = 0; n < o.size(); ++n) {
                    const auto t = o.tuple(n);
                    mk[std::vector<int>(t.begin(), t.end())] += o.values[n] / static_cast<double>(per);
                }
            }
        }
    }
    std::vector<TupleMap> mean(static_cast<std::size_t>(top));
    g.gamma_k.assign(static_cast<std::size_t>(top), 0.0);
    std::vector<double> batch_value(kBatches, 0.0);
    double tail = 0.0, mass = 0.0;
    for (std::size_t b = 0; b < kBatches; ++b) {
        tail += batch_tail[b] / kBatches;
        mass += batch_mass[b] / kBatches;
        for (std::size_t k = 0; k < batch_gamma[b].size(); ++k) {
            g.gamma_k[k] += batch_gamma[b][k] / kBatches;
            batch_value[b] += batch_gamma[b][k];
            batch_value[b] += shifted_dot(batch_mean[b][k], tau) * kernel.s_k(static_cast<int>(k) + 1);
            for (const auto& [t, v] : batch_mean[b][k]) mean[k][t] += v / kBatches;
        }
    }
    for (std::size_t k = 0; k < mean.size(); ++k) g.phi_k.push_back(shifted_dot(mean[k], tau));
    finish(tail, mass);
    const double bm = std::accumulate(batch_value.begin(), batch_value.end(), 0.0) / kBatches;
    double ss = 0.0;
    for (double v : batch_value) ss += (v - bm) * (v - bm);
    g.stderr_ = std::sqrt(ss / (kBatches - 1) / kBatches);
    return g;
}

EmpiricalCov empirical_cov(std::span<const AggregatePath> paths, long tau) {
    if (paths.empty()) throw ContractError("empirical_cov: no paths");
    const long lag = std::labs(tau);
    EmpiricalCov out;
    out.replicates = paths.size();
    std::vector<double> unit;
    for (const auto& p : paths) {
        const long T = static_cast<long>(p.x.size());
        if (lag >= T) throw IndexError("empirical_cov: |tau| must be below the path length");
        if (paths.size() == 1) {
            constexpr long kBlocks = 20;
            const long count = T - lag;
            if (count < kBlocks) throw ContractError("empirical_cov: single path too short for block errors");
            for (long b = 0; b < kBlocks; ++b) {
                const long lo = b * count / kBlocks, hi = (b + 1) * count / kBlocks;
                double s = 0.0;
                for (long t = lo; t < hi; ++t) s += p.x[static_cast<std::size_t>(t)] * p.x[static_cast<std::size_t>(t + lag)];
                unit.push_back(s / static_cast<double>(hi - lo));
            }
        } else {
            double s = 0.0;
            for (long t = 0; t + lag < T; ++t) s += p.x[static_cast<std::size_t>(t)] * p.x[static_cast<std::size_t>(t + lag)];
            unit.push_back(s / static_cast<double>(T - lag));
        }
    }
    const double n = static_cast<double>(unit.size());
    out.value = std::accumulate(unit.begin(), unit.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : unit) ss += (v - out.value) * (v - out.value);
    out.stderr_ = unit.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return out;
}

std::string_view to_string(CovarianceKind kind) {
    switch (kind) {
        case CovarianceKind::Empirical:
            return "empirical";
        case CovarianceKind::Exact:
            return "exact";
        case CovarianceKind::Limit:
            return "limit";
    }
    return "unknown";
}

}  // namespace dsagg
