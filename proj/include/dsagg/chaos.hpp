#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dsagg/models.hpp"

namespace dsagg {

/// All order-k terms, tuples stored flat (k ints per term) in lexicographic order.
struct ChaosOrder {
    int k = 1;
    std::vector<int> lags;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    std::span<const int> tuple(std::size_t n) const {
        return {lags.data() + n * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
    }
    double mass() const;
    /// Index of the tuple or -1.
    long find(std::span<const int> tuple) const;
};

/// Squared-l2 mass left out by the truncation.
struct ChaosTail {
    double order_tail = 0.0;   ///< orders beyond k_max
    double window_tail = 0.0;  ///< lags outside the window (and pruned terms) among retained orders
    bool analytic = true;      ///< false when a bound could not be computed in closed form

    double total() const { return order_tail + window_tail; }
};

struct ChaosCoefficients {
    ModelTag model = ModelTag::Linear;
    std::vector<double> y;
    int k_max = 0;
    int m = 0;
    int lag_lo = 0;  ///< smallest lag in the window (negative for noncausal models)
    int lag_hi = 0;
    /// Order-0 term. Excluded by the centered evaluation.
    double constant = 0.0;
    /// orders[k-1] holds chaos order k; trailing orders may be empty.
    std::vector<ChaosOrder> orders;
    ChaosTail tail;

    int max_order() const { return static_cast<int>(orders.size()); }
    const ChaosOrder* order(int k) const;
    double find(std::span<const int> tuple) const;
    double order_mass(int k) const;
    /// Centered mass sum_k order_mass(k).
    double mass() const;
    std::size_t term_count() const;
};

/// Sparse ordered-index coefficients at y. Bilinear-family k_max is the product depth (chaos orders
/// 1..k_max+1); for Linear/DSV* it is the chaos order. Throws ExistenceError when the model has no
/// L2 solution at y and ContractError for models without an ordered-index expansion.
ChaosCoefficients volterra_coefficients(const CoefficientModel& model, std::span<const double> y,
                                        const Truncation& truncation);

/// Read-only view of a scalar time series eps_t for t in [t_min, t_min + data.size()).
struct TimeSeriesView {
    std::span<const double> data;
    long t_min = 0;

    long t_end() const { return t_min + static_cast<long>(data.size()); }
    double operator()(long t) const { return data[static_cast<std::size_t>(t - t_min)]; }
};

struct ChaosEvalOptions {
    /// Orders to include; empty means all.
    std::vector<int> orders;
    bool include_constant = false;
};

/// Z_t for t in [t_begin, t_end) from the truncated expansion. IndexError when the series does not
/// cover t - lag_hi .. t - lag_lo.
std::vector<double> evaluate_chaos(const ChaosCoefficients& coeffs, const TimeSeriesView& eps,
                                   long t_begin, long t_end, const ChaosEvalOptions& options = {});

ChaosTail tail_mass(const ChaosCoefficients& coeffs);

/// Sparse CSV rows "k,l1,...,lk,value" preceded by a one-line JSON header prefixed with '#'.
void write_chaos_csv(std::ostream& out, const ChaosCoefficients& coeffs);

}  // namespace dsagg
