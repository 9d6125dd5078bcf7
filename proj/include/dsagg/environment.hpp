#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <span>
#include <string>
#include <vector>

#include "dsagg/models.hpp"

namespace dsagg {

enum class MarginalFamily { PointMass, UniformBox, BetaScaled, TruncatedNormal };

std::string_view to_string(MarginalFamily family);
MarginalFamily marginal_family_from_string(std::string_view name);

/// Per-coordinate parameters. Meaning by family:
///   PointMass:        value
///   UniformBox:       lo, hi
///   BetaScaled:       lo + (hi - lo) * Beta(shape_a, shape_b)
///   TruncatedNormal:  N(mean, sd^2) restricted to [lo, hi]
struct CoordinateLaw {
    double value = 0.0;
    double lo = 0.0;
    double hi = 1.0;
    double shape_a = 1.0;
    double shape_b = 1.0;
    double mean = 0.0;
    double sd = 1.0;
};

struct EnvironmentSpec {
    MarginalFamily family = MarginalFamily::PointMass;
    std::vector<CoordinateLaw> coords;  ///< one entry per dimension s
    std::string label = "environment";

    std::size_t dimension() const { return coords.size(); }

    /// Throws ConfigError on invalid parameters.
    void validate() const;

    /// Closed-form E[y_d] and E[y_d y_e] (coordinates are independent).
    std::vector<double> mean() const;
    std::vector<double> second_moment() const;  ///< row-major s x s
};

struct EnvironmentDraw {
    std::size_t n = 0;
    std::size_t s = 0;
    std::uint64_t seed = 0;
    std::uint64_t draw_index = 0;
    std::vector<double> values;  ///< row-major n x s

    std::span<const double> at(std::size_t i) const { return {values.data() + i * s, s}; }
    /// First n draws as a new draw (nested environments).
    EnvironmentDraw prefix(std::size_t count) const;
};

EnvironmentDraw sample_environment(const EnvironmentSpec& spec, std::size_t n, std::uint64_t seed,
                                   std::uint64_t draw_index = 0);

enum class Verdict { Pass, Fail, Inconclusive };
std::string_view to_string(Verdict v);

struct ConditionResult {
    std::string condition_id;
    std::string description;
    Verdict verdict = Verdict::Pass;
    double estimate = 0.0;        ///< MC estimate (expectations) or max over samples (a.s. constraints)
    double stderr_ = 0.0;
    double violation_fraction = 0.0;
};

struct ExistenceReport {
    ModelTag model = ModelTag::Linear;
    std::size_t mc_samples = 0;
    std::vector<ConditionResult> conditions;

    Verdict overall() const;
    const ConditionResult* find(std::string_view id) const;
};

struct CheckOptions {
    std::size_t mc_samples = 100'000;
    double se_band = 3.0;
    /// Relative standard error above which a finiteness expectation is reported inconclusive.
    double max_relative_se = 0.5;
    Truncation truncation{};
};

ExistenceReport check_existence(const CoefficientModel& model, const EnvironmentSpec& env,
                                std::uint64_t seed, const CheckOptions& options = {});

/// Per-y ingredients of the existence conditions (exposed for tests and diagnostics).
struct ExistenceQuantities {
    double as_constraint = 0.0;   ///< quantity that must stay < 1 a.s. (H, B_2, rho^2+..., sqrt(l2) a)
    double as_constraint2 = 0.0;  ///< second a.s. constraint when present (lambda1 B for ARCH)
    double expectation_term = 0.0;  ///< integrand of the finiteness condition
    bool finite = true;
    bool nonnegative = true;      ///< ARCH-family parameter maps must be nonnegative
};

ExistenceQuantities existence_quantities(const CoefficientModel& model, std::span<const double> y,
                                         const Truncation& truncation = {});

}  // namespace dsagg

namespace dsagg {

struct InnovationGeneratorSpec;

struct MomentReport {
    double delta = 1.0;
    double estimate = 0.0;  ///< E|Z_t|^{2+delta}
    double stderr_ = 0.0;
    double half_sample_estimate = 0.0;
    double half_sample_stderr = 0.0;
    bool heavy_tailed = false;
    /// Running estimate after 1/8, 1/4, 1/2 and all of the environment clusters.
    std::vector<std::pair<std::size_t, double>> stability_curve;
};

/// Monte Carlo E|Z_t|^{2+delta} for the centered elementary process.
MomentReport check_moment_k2delta(const CoefficientModel& model, const EnvironmentSpec& env,
                                  const InnovationGeneratorSpec& innovations, double delta,
                                  std::size_t mc_samples, std::uint64_t seed,
                                  const Truncation& truncation = {});

struct ScalarEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// E[V(y)] with V = ||a(y)||_1 (DSULBS) or ||c(y)||_2 (DSV* families).
ScalarEstimate check_k5(const CoefficientModel& model, const EnvironmentSpec& env,
                        std::size_t mc_samples, std::uint64_t seed,
                        const Truncation& truncation = {},
                        double innovation_bound = std::numeric_limits<double>::infinity());

/// V(y) itself.
double dependence_weight(const CoefficientModel& model, std::span<const double> y,
                         const Truncation& truncation = {},
                         double innovation_bound = std::numeric_limits<double>::infinity());

}  // namespace dsagg
