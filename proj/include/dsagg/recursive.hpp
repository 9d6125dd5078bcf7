#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dsagg/chaos.hpp"
#include "dsagg/models.hpp"

namespace dsagg {

/// max(10 m, 1000)
int default_burn_in(int m);

/// Runs the model recursion from a zero history started at t_begin - burn_in and returns Z_t for
/// t in [t_begin, t_end). Lags are truncated to the window m (GARCH(1,1) runs its exact two-term
/// recursion). ARCH-family models take the standardized innovation eps~ and map it to
/// eps = lambda1 (kappa eps~ + 1); a negative mapped value is a ContractError.
/// Linear models are evaluated by direct convolution.
std::vector<double> simulate_recursive(const CoefficientModel& model, std::span<const double> y,
                                       const TimeSeriesView& eps, long t_begin, long t_end,
                                       std::optional<int> burn_in, const Truncation& truncation,
                                       double guard = 1e12);

/// Lipschitz sequence a_k(y) of a DSULBS shift on the lag window, with V(y) = sum |a_k|.
struct LipschitzSequence {
    int lag_lo = 0;
    std::vector<double> a;
    double tail = 0.0;  ///< sum of |a_k| outside the window

    double l1() const;
};

/// innovation_bound is sup |eps| (infinity for unbounded inputs).
LipschitzSequence dsulbs_lipschitz(const DsulbsModel& model, std::span<const double> y, int m,
                                   double innovation_bound);

/// Clipped-linear f_T(sum_k c_k eps_{t-k}) or the product shift eps_t (c_0 + sum_{k!=0} c_k
/// eps_{t-k}). The product shift needs bounded innovations (ContractError otherwise).
std::vector<double> simulate_dsulbs(const DsulbsModel& model, std::span<const double> y,
                                    const TimeSeriesView& eps, long t_begin, long t_end, int m,
                                    double innovation_bound);

}  // namespace dsagg
