#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsagg/chaos.hpp"
#include "dsagg/environment.hpp"
#include "dsagg/innovations.hpp"
#include "dsagg/models.hpp"

namespace dsagg {

/// Z[i][t] for i in [0, n), t in [t_min, t_min + width), row-major.
struct ElementaryPanel {
    std::size_t n = 0;
    long t_min = 0;
    std::size_t width = 0;
    std::vector<double> values;
    ModelTag model = ModelTag::Linear;
    std::string method = "chaos";  ///< "chaos" | "recursive" | "dsulbs"
    Truncation truncation{};

    double operator()(std::size_t i, long t) const {
        return values[i * width + static_cast<std::size_t>(t - t_min)];
    }
};

/// Chaos coefficients of every unit of the draw (parallel over i).
std::vector<ChaosCoefficients> unit_coefficients(const CoefficientModel& model, const EnvironmentDraw& draw,
                                                 const Truncation& truncation);

/// Centered elementary values for t in [t_begin, t_end): chaos evaluation for DSV* models, the
/// DSULBS shift otherwise. `coeffs` may be empty for DSULBS models.
ElementaryPanel evaluate_panel(const CoefficientModel& model, const EnvironmentDraw& draw,
                               std::span<const ChaosCoefficients> coeffs, const InnovationPanel& eps,
                               long t_begin, long t_end, const Truncation& truncation,
                               double innovation_bound);

enum class NormalizationRule { Sqrt, N, Custom };

double normalization_constant(NormalizationRule rule, std::size_t n, double custom = 1.0);

struct AggregatePath {
    std::vector<double> x;
    long t_min = 0;
    std::size_t n = 0;
    double b_n = 1.0;
};

/// X_t = B_N^{-1} sum_i Z^i_t, summed in index order.
AggregatePath aggregate(const ElementaryPanel& panel, NormalizationRule rule = NormalizationRule::Sqrt,
                        double custom = 1.0);

/// sum over order-k tuples l of c_i(l) c_j(l + tau).
double psi_tau_k(const ChaosCoefficients& ci, const ChaosCoefficients& cj, long tau, int k);

/// Coefficients of many units laid out on the union of their tuples, one dense vector per unit and
/// order, so that Psi_{tau,k}(i, j) is a dot product through a per-tau shift map.
class CoefficientBank {
public:
    CoefficientBank() = default;
    explicit CoefficientBank(std::span<const ChaosCoefficients> units);

    std::size_t units() const { return units_; }
    int max_order() const { return static_cast<int>(orders_.size()); }
    /// Index map u -> index of tuple(u) + tau in the union, -1 when absent.
    std::vector<std::vector<long>> shift_map(long tau) const;
    double psi_k(std::size_t i, std::size_t j, const std::vector<std::vector<long>>& shift, int k) const;
    /// Union-indexed coefficient vector of unit i at order k.
    std::span<const double> vec(std::size_t i, int k) const;
    std::size_t order_size(int k) const;
    double mass(std::size_t i) const { return mass_[i]; }
    double tail(std::size_t i) const { return tail_[i]; }

private:
    struct Order {
        int k = 1;
        std::vector<int> lags;    ///< union tuples, flat, sorted
        std::vector<double> vals;  ///< units x size
        std::size_t size = 0;
    };
    std::size_t units_ = 0;
    std::vector<Order> orders_;
    std::vector<double> mass_;
    std::vector<double> tail_;
};

struct GammaNOptions {
    std::size_t pair_budget = 200'000'000;
    /// Sum cross pairs only over |i - j| <= band when chi has finite support.
    bool banded = true;
    /// For infinite-support kernels, drop pairs with |chi(i - j)| below this (0 keeps all pairs).
    double band_tolerance = 0.0;
};

struct GammaNResult {
    double value = 0.0;
    double truncation_bound = 0.0;
    std::size_t pairs = 0;
    long band = -1;  ///< -1 when every pair was visited
};

/// Gamma^N(tau, Y) = N^{-1} sum_{i,j} sum_k Psi_{tau,k}(y^i, y^j) chi(i - j)^k over the first n units.
GammaNResult gamma_n_exact(const CoefficientBank& bank, std::size_t n, const InteractionKernel& kernel,
                           long tau, const GammaNOptions& options = {});
GammaNResult gamma_n_exact(const EnvironmentDraw& draw, const CoefficientModel& model,
                           const InteractionKernel& kernel, long tau, const Truncation& truncation,
                           const GammaNOptions& options = {});

struct GammaLimit {
    double value = 0.0;
    double stderr_ = 0.0;
    std::vector<double> gamma_k;  ///< index k-1
    std::vector<double> phi_k;
    double truncation_bound = 0.0;
    std::string method;  ///< "point_mass" | "exact_moments" | "monte_carlo"
};

/// Gamma(tau) = sum_k gamma_k(tau) + sum_k phi_k(tau) s_k. DomainError for a non-summable kernel.
GammaLimit gamma_limit(const CoefficientModel& model, const EnvironmentSpec& env,
                       const InteractionKernel& kernel, long tau, const Truncation& truncation,
                       std::size_t mc_samples, std::uint64_t seed);

struct EmpiricalCov {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t replicates = 0;
};

/// Mean of X_t X_{t+tau} over t and replicates (processes are centered by construction); the
/// standard error comes from replicate means, or from 20 time blocks for a single path.
EmpiricalCov empirical_cov(std::span<const AggregatePath> paths, long tau);

enum class CovarianceKind { Empirical, Exact, Limit };
std::string_view to_string(CovarianceKind kind);

struct CovarianceRow {
    long tau = 0;
    double value = 0.0;
    double err = 0.0;  ///< standard error (empirical) or truncation bound (exact, limit)
};

struct CovarianceTable {
    CovarianceKind kind = CovarianceKind::Exact;
    std::vector<CovarianceRow> rows;
};

}  // namespace dsagg
