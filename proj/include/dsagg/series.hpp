#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dsagg/models.hpp"

namespace dsagg {

/// Truncated power series sum_{k=0}^{M} c_k s^k.
struct PowerSeries {
    std::vector<double> coeffs;

    PowerSeries() = default;
    explicit PowerSeries(std::vector<double> c) : coeffs(std::move(c)) {}

    std::size_t order() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }
    double operator[](std::size_t k) const { return k < coeffs.size() ? coeffs[k] : 0.0; }
};

/// g = (1 - b)^{-1} truncated at lag m. Requires b_0 == 0 (ContractError otherwise).
PowerSeries invert_power_series(const PowerSeries& b, std::size_t m);

/// Cauchy product a * g truncated at lag m.
PowerSeries compose_h(const PowerSeries& a, const PowerSeries& g, std::size_t m);

/// ARCH(inf) coefficients of a GARCH(1,1): b_0 = alpha0/(1-beta), b_k = alpha beta^{k-1}.
struct ArchCoefficients {
    double b0 = 0.0;
    PowerSeries b;  ///< b[0] == 0
    /// sum_{k>m} b_k = alpha beta^m / (1 - beta)
    double tail_bound = 0.0;
};

ArchCoefficients map_garch11(double alpha0, double alpha, double beta, std::size_t m);

/// Innovation moments of a nonnegative ARCH innovation and the standardization
/// eps_t = lambda1 (kappa * eps~_t + 1).
struct ArchOrthogonalization {
    double lambda1 = 1.0;
    double lambda2 = 3.0;
    double kappa = 0.0;

    static ArchOrthogonalization from_moments(double lambda1, double lambda2);
    double standardize(double eps) const { return (eps / lambda1 - 1.0) / kappa; }
    double destandardize(double eps_tilde) const { return lambda1 * (kappa * eps_tilde + 1.0); }
};

/// Shared structure of the bilinear family's ordered-index expansion:
///
///   Z_t = constant + prefactor * sum_{j>=0} sum_{0<=l_1<...<l_{j+1}}
///           lead_{l_1} h_{l_2-l_1} ... h_{l_{j+1}-l_j} eps_{t-l_1} ... eps_{t-l_{j+1}}
///
/// bilinear: prefactor b0, lead = g = (1-a)^{-1}, h = b g
/// LARCH:    prefactor b0, lead = delta_0, h = b
/// ARCH:     constant mu = lambda1 b0 / (1 - lambda1 B), prefactor kappa mu,
///           lead = g = (1 - lambda1 b)^{-1}, h_k = kappa g_k (k >= 1)
struct BilinearForm {
    double constant = 0.0;
    double prefactor = 0.0;
    std::vector<double> lead;  ///< lead[l], l = 0..horizon
    std::vector<double> h;     ///< h[d], d = 0..horizon; h[0] is unused (0)
    double lead_sq = 0.0;      ///< F = sum_l lead_l^2 (with geometric tail estimate)
    double h_sq = 0.0;         ///< H = sum_{d>=1} h_d^2
    double b_sum = 0.0;        ///< B = sum_k b_k (ARCH family), 0 otherwise
    double lambda1 = 1.0;
    bool converged = true;     ///< false when a series fails to decay within the horizon

    /// b0^2 F / (1 - H) (times prefactor^2 in general); infinite when H >= 1.
    double centered_mass() const;
    /// Mass of depth j terms: prefactor^2 F H^j.
    double depth_mass(int depth) const;
    /// Mass of all depths > k_max: prefactor^2 F H^{k_max+1} / (1 - H).
    double depth_tail(int k_max) const;
};

bool is_bilinear_family(const CoefficientModel& model);

/// Computes the bilinear form at y with series evaluated up to `horizon` lags.
BilinearForm bilinear_form(const CoefficientModel& model, std::span<const double> y,
                           std::size_t horizon);

/// Default horizon used when the caller only has a lag window m.
std::size_t series_horizon(int m);

}  // namespace dsagg
