#include "dsagg/coefficient_maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsagg/errors.hpp"

namespace dsagg {

double AffineMap::operator()(std::span<const double> y) const {
    double v = base;
    const std::size_t n = std::min(slope.size(), y.size());
    for (std::size_t d = 0; d < n; ++d) v += slope[d] * y[d];
    return v;
}

bool AffineMap::is_constant() const {
    return std::all_of(slope.begin(), slope.end(), [](double s) { return s == 0.0; });
}

SequenceMap SequenceMap::finite(int lag_min, std::vector<double> values, AffineMap amp) {
    return {Kind::Finite, lag_min, std::move(values), std::move(amp), AffineMap::constant(0.0)};
}

SequenceMap SequenceMap::geometric(int lag_min, AffineMap amp, AffineMap rate) {
    return {Kind::Geometric, lag_min, {}, std::move(amp), std::move(rate)};
}

SequenceMap SequenceMap::two_sided_geometric(AffineMap amp, AffineMap rate) {
    return {Kind::TwoSidedGeometric, 0, {}, std::move(amp), std::move(rate)};
}

double SequenceMap::at(int lag, std::span<const double> y) const {
    switch (kind) {
        case Kind::Finite: {
            const long idx = static_cast<long>(lag) - lag_min;
            if (idx < 0 || idx >= static_cast<long>(values.size())) return 0.0;
            return amp(y) * values[static_cast<std::size_t>(idx)];
        }
        case Kind::Geometric:
            if (lag < lag_min) return 0.0;
            return amp(y) * std::pow(rate(y), lag - lag_min);
        case Kind::TwoSidedGeometric:
            return amp(y) * std::pow(rate(y), std::abs(lag));
    }
    return 0.0;
}

int SequenceMap::support_lo(int window) const {
    switch (kind) {
        case Kind::Finite:
        case Kind::Geometric:
            return std::max(lag_min, -window);
        case Kind::TwoSidedGeometric:
            return -window;
    }
    return -window;
}

int SequenceMap::support_hi(int window) const {
    switch (kind) {
        case Kind::Finite:
            return std::min(lag_min + static_cast<int>(values.size()) - 1, window);
        case Kind::Geometric:
        case Kind::TwoSidedGeometric:
            return window;
    }
    return window;
}

std::vector<double> SequenceMap::dense(int lo, int hi, std::span<const double> y) const {
    std::vector<double> out;
    if (hi < lo) return out;
    out.reserve(static_cast<std::size_t>(hi - lo + 1));
    if (kind == Kind::Finite) {
        for (int k = lo; k <= hi; ++k) out.push_back(at(k, y));
        return out;
    }
    // Powers by repeated multiplication so long windows stay cheap.
    const double a = amp(y);
    const double r = rate(y);
    for (int k = lo; k <= hi; ++k) {
        int e = kind == Kind::Geometric ? k - lag_min : std::abs(k);
        out.push_back(e < 0 ? 0.0 : a * std::pow(r, e));
    }
    return out;
}

namespace {

// Sum_{e >= e0} q^e for 0 <= q < 1.
double geometric_tail(double q, int e0) {
    if (q >= 1.0) return std::numeric_limits<double>::infinity();
    if (q == 0.0) return e0 <= 0 ? 1.0 : 0.0;
    return std::pow(q, std::max(e0, 0)) / (1.0 - q);
}

}  // namespace

double SequenceMap::tail_sq_outside(int lo, int hi, std::span<const double> y) const {
    switch (kind) {
        case Kind::Finite: {
            double s = 0.0;
            for (std::size_t j = 0; j < values.size(); ++j) {
                const int k = lag_min + static_cast<int>(j);
                if (k < lo || k > hi) s += values[j] * values[j];
            }
            const double a = amp(y);
            return a * a * s;
        }
        case Kind::Geometric: {
            const double a = amp(y);
            const double q = rate(y) * rate(y);
            if (a == 0.0) return 0.0;
            double s = 0.0;
            // lags below lo that lie in the support
            for (int k = lag_min; k < lo; ++k) s += std::pow(q, k - lag_min);
            s += geometric_tail(q, std::max(hi + 1, lag_min) - lag_min);
            return a * a * s;
        }
        case Kind::TwoSidedGeometric: {
            const double a = amp(y);
            const double q = rate(y) * rate(y);
            if (a == 0.0) return 0.0;
            double s = 0.0;
            // right tail: k > hi
            if (hi >= 0) {
                s += geometric_tail(q, hi + 1);
            } else {
                s += geometric_tail(q, 0) + geometric_tail(q, 1) - geometric_tail(q, -hi);
            }
            // left tail: k < lo, i.e. |k| > -lo
            if (lo <= 0) {
                s += geometric_tail(q, -lo + 1);
            } else {
                s += geometric_tail(q, 1) + geometric_tail(q, 0) - geometric_tail(q, lo);
            }
            return a * a * s;
        }
    }
    return 0.0;
}

double SequenceMap::tail_abs_outside(int lo, int hi, std::span<const double> y) const {
    switch (kind) {
        case Kind::Finite: {
            double s = 0.0;
            for (std::size_t j = 0; j < values.size(); ++j) {
                const int k = lag_min + static_cast<int>(j);
                if (k < lo || k > hi) s += std::abs(values[j]);
            }
            return std::abs(amp(y)) * s;
        }
        case Kind::Geometric: {
            const double a = std::abs(amp(y));
            const double q = std::abs(rate(y));
            if (a == 0.0) return 0.0;
            double s = 0.0;
            for (int k = lag_min; k < lo; ++k) s += std::pow(q, k - lag_min);
            s += geometric_tail(q, std::max(hi + 1, lag_min) - lag_min);
            return a * s;
        }
        case Kind::TwoSidedGeometric: {
            const double a = std::abs(amp(y));
            const double q = std::abs(rate(y));
            if (a == 0.0) return 0.0;
            double s = 0.0;
            if (hi >= 0) {
                s += geometric_tail(q, hi + 1);
            } else {
                s += geometric_tail(q, 0) + geometric_tail(q, 1) - geometric_tail(q, -hi);
            }
            if (lo <= 0) {
                s += geometric_tail(q, -lo + 1);
            } else {
                s += geometric_tail(q, 1) + geometric_tail(q, 0) - geometric_tail(q, lo);
            }
            return a * s;
        }
    }
    return 0.0;
}

double SequenceMap::l1_norm(std::span<const double> y) const {
    // everything lies outside an empty window
    return tail_abs_outside(1, 0, y);
}

double SequenceMap::l2_sq(std::span<const double> y) const { return tail_sq_outside(1, 0, y); }

bool SequenceMap::is_affine_in_y() const {
    switch (kind) {
        case Kind::Finite:
            return true;
        case Kind::Geometric:
        case Kind::TwoSidedGeometric:
            return rate.is_constant();
    }
    return false;
}

bool SequenceMap::summable_at(std::span<const double> y) const {
    if (kind == Kind::Finite) return true;
    return std::abs(rate(y)) < 1.0 || amp(y) == 0.0;
}

}  // namespace dsagg
