#include "dsagg/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dsagg/errors.hpp"
#include "dsagg/series.hpp"

namespace dsagg {

double ChaosOrder::mass() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return s;
}

long ChaosOrder::find(std::span<const int> t) const {
    if (t.size() != static_cast<std::size_t>(k)) return -1;
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const auto cand = tuple(mid);
        if (std::lexicographical_compare(cand.begin(), cand.end(), t.begin(), t.end())) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if (lo < size() && std::equal(t.begin(), t.end(), tuple(lo).begin())) return static_cast<long>(lo);
    return -1;
}

const ChaosOrder* ChaosCoefficients::order(int k) const {
    if (k < 1 || k > max_order()) return nullptr;
    return &orders[static_cast<std::size_t>(k - 1)];
}

double ChaosCoefficients::find(std::span<const int> t) const {
    if (t.empty()) return constant;
    const ChaosOrder* o = order(static_cast<int>(t.size()));
    if (!o) return 0.0;
    const long idx = o->find(t);
    return idx < 0 ? 0.0 : o->values[static_cast<std::size_t>(idx)];
}

double ChaosCoefficients::order_mass(int k) const {
    const ChaosOrder* o = order(k);
    return o ? o->mass() : 0.0;
}

double ChaosCoefficients::mass() const {
    double s = 0.0;
    for (const auto& o : orders) s += o.mass();
    return s;
}

std::size_t ChaosCoefficients::term_count() const {
    std::size_t n = 0;
    for (const auto& o : orders) n += o.size();
    return n;
}

namespace {

void init_orders(ChaosCoefficients& c, int count) {
    c.orders.clear();
    for (int k = 1; k <= count; ++k) c.orders.push_back(ChaosOrder{k, {}, {}});
}

ChaosCoefficients linear_coefficients(const LinearModel& m, std::span<const double> y,
                                      const Truncation& tr) {
    ChaosCoefficients c;
    init_orders(c, 1);
    const int lo = m.c.support_lo(tr.m);
    const int hi = m.c.support_hi(tr.m);
    c.lag_lo = std::min(lo, 0);
    c.lag_hi = std::max(hi, 0);
    if (hi >= lo) {
        const auto vals = m.c.dense(lo, hi, y);
        for (int l = lo; l <= hi; ++l) {
            const double v = vals[static_cast<std::size_t>(l - lo)];
            if (v == 0.0) continue;
            c.orders[0].lags.push_back(l);
            c.orders[0].values.push_back(v);
        }
    }
    if (!m.c.summable_at(y)) throw ExistenceError("linear coefficients are not square summable at y");
    c.tail.window_tail = m.c.tail_sq_outside(lo, hi, y);
    return c;
}

ChaosCoefficients dsv_star_coefficients(const DsvStarModel& m, std::span<const double> y,
                                        const Truncation& tr) {
    ChaosCoefficients c;
    c.constant = m.constant(y);
    std::map<std::vector<int>, double> merged;
    int top = 0;
    for (const auto& term : m.terms) {
        if (term.lags.empty()) throw ContractError("DSV* term with no lags; use the constant");
        for (std::size_t j = 1; j < term.lags.size(); ++j)
            if (term.lags[j] <= term.lags[j - 1])
                throw ContractError("DSV* term lags must be strictly increasing");
        const double v = term.value(y);
        const int k = static_cast<int>(term.lags.size());
        if (k > tr.k_max) {
            c.tail.order_tail += v * v;
            continue;
        }
        if (term.lags.front() < -tr.m || term.lags.back() > tr.m) {
            c.tail.window_tail += v * v;
            continue;
        }
        merged[term.lags] += v;
        top = std::max(top, k);
    }
    init_orders(c, top);
    // std::map orders vectors lexicographically, so per-order storage comes out sorted.
    for (const auto& [lags, v] : merged) {
        auto& o = c.orders[lags.size() - 1];
        o.lags.insert(o.lags.end(), lags.begin(), lags.end());
        o.values.push_back(v);
        c.lag_lo = std::min(c.lag_lo, lags.front());
        c.lag_hi = std::max(c.lag_hi, lags.back());
    }
    return c;
}

struct TupleBuilder {
    const BilinearForm& form;
    const std::vector<int>& steps;  // nonzero h increments
    ChaosCoefficients& out;
    int m;
    int depth_max;
    double prune;
    std::size_t max_terms;
    std::size_t count = 0;
    std::vector<int> stack;

    void emit(double v) {
        if (++count > max_terms)
            throw ResourceError("chaos expansion exceeds the term budget; lower k_max or m");
        auto& o = out.orders[stack.size() - 1];
        o.lags.insert(o.lags.end(), stack.begin(), stack.end());
        o.values.push_back(v);
    }

    void extend(double v) {
        emit(v);
        if (static_cast<int>(stack.size()) > depth_max) return;
        const int last = stack.back();
        for (int d : steps) {
            if (last + d > m) break;
            const double w = v * form.h[static_cast<std::size_t>(d)];
            if (std::abs(w) <= prune) continue;
            stack.push_back(last + d);
            extend(w);
            stack.pop_back();
        }
    }
};

ChaosCoefficients bilinear_coefficients(const CoefficientModel& model, std::span<const double> y,
                                        const Truncation& tr) {
    const BilinearForm form = bilinear_form(model, y, series_horizon(tr.m));
    if (!form.converged || !(form.h_sq < 1.0))
        throw ExistenceError("bilinear-family expansion diverges at y (H(y) >= 1)");
    if (!std::isfinite(form.prefactor) || !std::isfinite(form.constant))
        throw ExistenceError("ARCH mean is infinite at y (lambda1 B(y) >= 1)");

    ChaosCoefficients c;
    c.constant = form.constant;
    init_orders(c, tr.k_max + 1);
    c.lag_lo = 0;
    c.lag_hi = tr.m;

    std::vector<int> steps;
    for (int d = 1; d <= tr.m && d < static_cast<int>(form.h.size()); ++d)
        if (form.h[static_cast<std::size_t>(d)] != 0.0) steps.push_back(d);

    const double prune = tr.prune_tol * std::abs(form.prefactor);
    TupleBuilder b{form, steps, c, tr.m, tr.k_max, prune, tr.max_terms, 0, {}};
    if (form.prefactor != 0.0) {
        for (int l = 0; l <= tr.m && l < static_cast<int>(form.lead.size()); ++l) {
            const double v = form.prefactor * form.lead[static_cast<std::size_t>(l)];
            if (v == 0.0 || std::abs(v) <= prune) continue;
            b.stack.assign(1, l);
            b.extend(v);
        }
    }

    double closed = 0.0;
    for (int j = 0; j <= tr.k_max; ++j) closed += form.depth_mass(j);
    c.tail.order_tail = form.depth_tail(tr.k_max);
    c.tail.window_tail = std::max(0.0, closed - c.mass());
    return c;
}

}  // namespace

ChaosCoefficients volterra_coefficients(const CoefficientModel& model, std::span<const double> y,
                                        const Truncation& truncation) {
    if (truncation.k_max < 1 || truncation.m < 0)
        throw ContractError("volterra_coefficients: need k_max >= 1 and m >= 0");
    ChaosCoefficients c = std::visit(
        [&](const auto& m) -> ChaosCoefficients {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return linear_coefficients(m, y, truncation);
            } else if constexpr (std::is_same_v<T, DsvStarModel>) {
                return dsv_star_coefficients(m, y, truncation);
            } else if constexpr (std::is_same_v<T, DsulbsModel>) {
                throw ContractError("DSULBS models have no ordered-index expansion");
            } else {
                return bilinear_coefficients(model, y, truncation);
            }
        },
        model);
    c.model = tag_of(model);
    c.y.assign(y.begin(), y.end());
    c.k_max = truncation.k_max;
    c.m = truncation.m;
    return c;
}

std::vector<double> evaluate_chaos(const ChaosCoefficients& coeffs, const TimeSeriesView& eps,
                                   long t_begin, long t_end, const ChaosEvalOptions& options) {
    if (t_end <= t_begin) return {};
    if (t_begin - coeffs.lag_hi < eps.t_min || t_end - 1 - coeffs.lag_lo >= eps.t_end())
        throw IndexError("evaluate_chaos: innovation series does not cover the lag window");

    std::vector<const ChaosOrder*> active;
    for (const auto& o : coeffs.orders) {
        if (o.size() == 0) continue;
        if (!options.orders.empty() &&
            std::find(options.orders.begin(), options.orders.end(), o.k) == options.orders.end())
            continue;
        active.push_back(&o);
    }

    std::vector<double> z(static_cast<std::size_t>(t_end - t_begin), 0.0);
    for (long t = t_begin; t < t_end; ++t) {
        double acc = options.include_constant ? coeffs.constant : 0.0;
        for (const ChaosOrder* o : active) {
            const std::size_t k = static_cast<std::size_t>(o->k);
            const int* lag = o->lags.data();
            for (std::size_t n = 0; n < o->size(); ++n, lag += k) {
                double p = o->values[n];
                for (std::size_t j = 0; j < k; ++j) p *= eps(t - lag[j]);
                acc += p;
            }
        }
        z[static_cast<std::size_t>(t - t_begin)] = acc;
    }
    return z;
}

ChaosTail tail_mass(const ChaosCoefficients& coeffs) { return coeffs.tail; }

void write_chaos_csv(std::ostream& out, const ChaosCoefficients& coeffs) {
    nlohmann::ordered_json header;
    header["model"] = std::string(to_string(coeffs.model));
    header["y"] = coeffs.y;
    header["k_max"] = coeffs.k_max;
    header["m"] = coeffs.m;
    header["constant"] = coeffs.constant;
    header["order_tail"] = coeffs.tail.order_tail;
    header["window_tail"] = coeffs.tail.window_tail;
    out << "# " << header.dump() << '\n';
    out << "k,lags,value\n";
    for (const auto& o : coeffs.orders) {
        for (std::size_t n = 0; n < o.size(); ++n) {
            const auto t = o.tuple(n);
            out << fmt::format("{},{},{}\n", o.k, fmt::join(t, " "), o.values[n]);
        }
    }
}

}  // namespace dsagg
