#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dsagg {

/// y -> base + <slope, y>. A slope shorter than y ignores the trailing coordinates.
struct AffineMap {
    double base = 0.0;
    std::vector<double> slope;

    static AffineMap constant(double v) { return {v, {}}; }

    double operator()(std::span<const double> y) const;
    bool is_constant() const;
};

/// A lag-indexed coefficient sequence k -> c_k(y) whose shape is one of a few closed families.
///
/// Finite:             c_k = amp(y) * values[k - lag_min] on [lag_min, lag_min + values.size()).
/// Geometric:          c_k = amp(y) * rate(y)^(k - lag_min) for k >= lag_min.
/// TwoSidedGeometric:  c_k = amp(y) * rate(y)^|k| for all k.
struct SequenceMap {
    enum class Kind { Finite, Geometric, TwoSidedGeometric };

    Kind kind = Kind::Finite;
    int lag_min = 0;
    std::vector<double> values;
    AffineMap amp = AffineMap::constant(1.0);
    AffineMap rate = AffineMap::constant(0.0);

    static SequenceMap zero() { return {Kind::Finite, 1, {}, AffineMap::constant(0.0), {}}; }
    static SequenceMap finite(int lag_min, std::vector<double> values,
                              AffineMap amp = AffineMap::constant(1.0));
    static SequenceMap geometric(int lag_min, AffineMap amp, AffineMap rate);
    static SequenceMap two_sided_geometric(AffineMap amp, AffineMap rate);

    double at(int lag, std::span<const double> y) const;

    /// Smallest/largest lag that can be nonzero (clamped to the window [-window, window]).
    int support_lo(int window) const;
    int support_hi(int window) const;

    /// Coefficients on [lo, hi] (inclusive), zero outside the support.
    std::vector<double> dense(int lo, int hi, std::span<const double> y) const;

    /// Sum of c_k^2 over lags outside [lo, hi]; exact for the closed families.
    double tail_sq_outside(int lo, int hi, std::span<const double> y) const;
    /// Sum over lags outside [lo, hi] of |c_k|.
    double tail_abs_outside(int lo, int hi, std::span<const double> y) const;

    double l1_norm(std::span<const double> y) const;
    double l2_sq(std::span<const double> y) const;

    /// True when every coefficient is an affine function of y (needed for exact moment averaging).
    bool is_affine_in_y() const;
    /// Finite support or |rate| < 1 at y.
    bool summable_at(std::span<const double> y) const;
};

}  // namespace dsagg
