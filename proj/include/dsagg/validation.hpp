#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsagg/aggregation.hpp"
#include "dsagg/environment.hpp"
#include "dsagg/innovations.hpp"
#include "dsagg/models.hpp"

namespace dsagg {

/// f_T(z) = (z v -T) ^ T
double truncate(double z, double T);

struct TruncationMomentResult {
    double lhs = 0.0;  ///< E|Z - f_T(Z)|^k
    double rhs = 0.0;  ///< 2 E|Z|^m T^{-(m-k)}
    double diff_stderr = 0.0;  ///< standard error of the paired difference lhs_i - rhs_i
    bool pass = true;
};

/// pass iff lhs <= rhs + 3 SE. ContractError unless m > k >= 1 and T > 0.
TruncationMomentResult truncation_moment_check(std::span<const double> samples, double T, double k,
                                               double m);

/// Closed 1-based index range.
struct IndexBlock {
    std::size_t first = 1;
    std::size_t last = 0;
    std::size_t size() const { return last + 1 - first; }
};

struct BlockScheme {
    std::size_t n = 0;
    double alpha = 0.0;
    double beta = 0.0;
    std::size_t p = 0;
    std::size_t q = 0;
    std::size_t r = 0;
    std::vector<IndexBlock> big;    ///< I_1..I_r, |I_m| = p
    std::vector<IndexBlock> small;  ///< J_1..J_r, J_r absorbs the remainder
};

/// p = floor(N^alpha), q = floor(N^beta), r = floor(N / (p + q)); I and J alternate from 1.
/// ContractError unless 0 < beta < alpha < 1, DomainError when p + q > N or q == 0.
BlockScheme bernstein_blocks(std::size_t n, double alpha, double beta);

struct ExponentWindow {
    WeakDepFamily family = WeakDepFamily::Lambda;
    double delta = 1.0;
    double decay = 0.0;      ///< lambda or kappa
    double threshold = 0.0;  ///< 2 + 3/delta or 2 + 2/delta
    double alpha_max = 0.0;  ///< delta / (2 (1 + delta))
    double offset = 0.0;     ///< constraint offset - decay * beta < alpha
    bool empty = true;
    /// An interior point of the region (only meaningful when !empty).
    double alpha = 0.0;
    double beta = 0.0;
};

/// Feasible (alpha, beta) with 0 < beta < alpha < delta/(2(1+delta)) and offset - decay*beta < alpha.
/// lambda, eta and theta profiles use the lambda thresholds, kappa and kappa' the kappa ones.
ExponentWindow clt_exponent_window(double delta, double decay, WeakDepFamily family);
bool in_exponent_window(const ExponentWindow& w, double alpha, double beta);

struct TestFunction {
    std::string name;
    std::size_t arity = 1;  ///< coordinates read; inputs may be longer
    double lipschitz = 1.0;  ///< declared constant w.r.t. the l1 norm
    std::function<double(std::span<const double>)> fn;
    bool certified = false;
};

/// Members are bounded by 1 and certified on a grid when the dictionary is built.
class TestFunctionDictionary {
public:
    /// Clipped coordinate, scaled clip, clipped mean, product of clips and sine of the mean, for
    /// every arity 1..3.
    static TestFunctionDictionary standard();

    void add(TestFunction f);  ///< added uncertified; call certify()
    /// Checks sup|f| <= 1 and the Lipschitz constant on a grid over [-box, box]^arity plus random
    /// pairs; returns the number of members that failed.
    std::size_t certify(double box = 4.0, std::size_t grid = 9, std::uint64_t seed = 7);

    const std::vector<TestFunction>& members() const { return members_; }

private:
    std::vector<TestFunction> members_;
};

/// Index blocks i_u and j_v of one probe, 0-based unit indices; gap = min(j) - max(i).
struct ProbeTemplate {
    std::vector<std::size_t> i;
    std::vector<std::size_t> j;
    long gap() const;
};

struct ProbeEntry {
    std::string f;
    std::string g;
    double cov = 0.0;
    double stderr_ = 0.0;
    double bound = 0.0;
    double margin = 0.0;  ///< bound + 3 SE - |cov|
    bool pass = true;
    bool zero_bound = false;
};

struct ProbeReport {
    long gap = 0;
    double epsilon = 0.0;
    std::vector<ProbeEntry> entries;
    /// max |cov| / psi over the dictionary: a lower bound on the dependence coefficient.
    double coefficient_lower_bound = 0.0;
    bool pass() const;
};

/// samples is replicates x units, row-major. weights holds V(y^i) per unit (empty = 1 each);
/// d_{i_u} is the sum of the weights over the block.
ProbeReport dependence_probe(std::span<const double> samples, std::size_t units,
                             const TestFunctionDictionary& dictionary, const ProbeTemplate& probe,
                             const DependenceProfile& profile, std::span<const double> weights = {});

struct CovarianceBoundResult {
    double cov = 0.0;
    double stderr_ = 0.0;
    double constant = 0.0;  ///< 6 E|Z|^{2+delta} + 2 (E V + (E V)^2)
    double decay = 0.0;     ///< eps(|i-j|)^{delta/(1+delta)} (kappa families: eps(|i-j|))
    double bound = 0.0;
    double margin = 0.0;
    bool pass = true;
};

/// |cov(Z^i, Z^j)| over paired replicates against the weak-dependence covariance bound.
/// ContractError when i == j.
CovarianceBoundResult covariance_bound_check(std::span<const double> zi, std::span<const double> zj,
                                             std::size_t i, std::size_t j,
                                             const DependenceProfile& profile, double delta,
                                             double moment_2delta, double ev);

struct NormalityReport {
    std::size_t n = 0;
    double target_variance = 1.0;
    std::string target_source;  ///< "limit" | "exact" | caller supplied
    double ks = 0.0;
    double p_value = 1.0;
    double skewness = 0.0;
    double skew_stderr = 0.0;
    double excess_kurtosis = 0.0;
    double kurt_stderr = 0.0;
    std::vector<std::pair<double, double>> qq;  ///< (normal quantile, sorted standardized sample)
    /// max over the grid of |E exp(i x Z) - exp(-x^2/2)|; empty grid leaves it NaN.
    double cf_distance = 0.0;
};

/// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x);

/// One-sample KS test of samples / sqrt(target_variance) against N(0,1). The p-value uses the
/// asymptotic distribution with the finite-n correction (sqrt(n) + 0.12 + 0.11/sqrt(n)).
NormalityReport normality_test(std::span<const double> samples, double target_variance,
                               std::string target_source = "limit", std::span<const double> cf_grid = {});

struct CltConfig {
    CoefficientModel model;
    EnvironmentSpec env;
    InnovationGeneratorSpec innovations;
    Truncation truncation{};
    std::vector<std::size_t> n_grid{64, 4096};
    std::size_t replicates = 2000;
    std::vector<long> time_points{0, 1, 2};
    /// Optional linear combination sum_k w_k X_{t_k} over time_points (same length).
    std::vector<double> combination;
    std::size_t env_seeds = 5;
    std::size_t limit_mc_samples = 20000;
    std::vector<double> cf_grid{0.5, 1.0, 2.0};
    std::uint64_t seed = 1;
};

struct CltCell {
    std::size_t n = 0;
    std::size_t env_seed = 0;
    std::string statistic;  ///< "t=<k>" or "combination"
    double gamma_n = 0.0;   ///< variance of the statistic under Gamma^N(., Y)
    NormalityReport vs_limit;
    NormalityReport vs_exact;
};

struct CltResult {
    double gamma0 = 0.0;  ///< variance of the statistic in the limit
    std::vector<CltCell> cells;
    std::vector<std::pair<std::size_t, double>> median_ks;       ///< per N, vs the limit
    std::vector<std::pair<std::size_t, double>> median_p;        ///< per N, vs the limit
    std::vector<std::pair<std::size_t, double>> median_ks_exact; ///< per N, vs Gamma^N
    bool trend_ok = false;  ///< median KS nonincreasing over the N grid
};

CltResult run_clt_experiment(const CltConfig& config);

struct SllnConfig {
    CoefficientModel model;
    EnvironmentSpec env;
    KernelSpec kernel;
    Truncation truncation{};
    std::vector<std::size_t> n_grid{100, 1000, 10000};
    std::vector<long> taus{0};
    std::size_t env_seeds = 20;
    std::size_t limit_mc_samples = 20000;
    /// Pairs with |chi| below this are skipped for infinite-support kernels.
    double band_tolerance = 1e-17;
    std::uint64_t seed = 1;
};

struct SllnRow {
    std::size_t n = 0;
    long tau = 0;
    double median_abs_diff = 0.0;
    std::vector<double> gamma_n;  ///< per environment seed
};

struct SllnResult {
    std::vector<GammaLimit> limits;  ///< per tau
    std::vector<SllnRow> rows;
    /// median |diff| at the first N over that at the last N, per tau
    std::vector<double> shrink;
    bool monotone = false;
    bool exact = false;  ///< every Gamma^N equals Gamma exactly
};

SllnResult run_slln_experiment(const SllnConfig& config);

struct ProbeConfig {
    CoefficientModel model;
    EnvironmentSpec env;
    InnovationGeneratorSpec innovations;
    Truncation truncation{};
    std::size_t units = 12;
    std::size_t replicates = 400;
    std::size_t trials = 1000;
    std::vector<long> gaps{1, 2, 8};
    std::size_t block = 2;  ///< |i_u| = |j_v|
    double delta = 1.0;
    std::size_t moment_samples = 20000;
    std::uint64_t seed = 1;
};

struct ProbeGapSummary {
    long gap = 0;
    double epsilon = 0.0;
    bool beyond_window = false;  ///< eps(gap) == 0
    std::size_t checks = 0;      ///< (trial, f, g) probe checks
    std::size_t passes = 0;
    double min_margin = 0.0;
    std::size_t lemma_checks = 0;
    std::size_t lemma_passes = 0;
    double lemma_min_margin = 0.0;
    ProbeReport first_trial;
    CovarianceBoundResult first_lemma;
};

struct ProbeResult {
    DependenceProfile profile;
    double moment_2delta = 0.0;
    double ev = 0.0;
    std::vector<ProbeGapSummary> gaps;
};

/// Probes the elementary field Z^i_0 (one environment draw per trial, innovations redrawn per
/// replicate) with the dictionary and the covariance bound, for every gap.
ProbeResult run_probe_experiment(const ProbeConfig& config);

}  // namespace dsagg
