#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsagg/chaos.hpp"

namespace dsagg {

enum class InnovationKind { IidNoise, LinearShift, VolterraShift, GaussianStationary };
enum class InputLaw { Gaussian, Rademacher, CenteredUniform };

std::string_view to_string(InnovationKind kind);
std::string_view to_string(InputLaw law);
InnovationKind innovation_kind_from_string(std::string_view name);
InputLaw input_law_from_string(std::string_view name);

/// sup |xi| for a unit-variance input law (infinity for Gaussian).
double input_bound(InputLaw law);

/// Cross-sectional covariance chi(r) of a Gaussian stationary generator.
struct KernelSpec {
    enum class Kind { Table, Geometric, PowerLaw, Constant };

    Kind kind = Kind::Table;
    std::vector<double> table{1.0};  ///< chi(0..L), chi(0) == 1
    double rate = 0.0;               ///< Geometric: chi(r) = rate^|r|
    double exponent = 2.0;           ///< PowerLaw: chi(r) = (1 + |r|)^(-exponent)

    double at(long r) const;
    /// Largest lag with chi != 0, or -1 for infinite support.
    long support() const;
};

std::string_view to_string(KernelSpec::Kind kind);
KernelSpec::Kind kernel_kind_from_string(std::string_view name);

/// w * prod_{l in offsets} xi^{i-l}; offsets strictly increasing.
struct VolterraShiftTerm {
    std::vector<int> offsets;
    double weight = 0.0;
};

struct InnovationGeneratorSpec {
    InnovationKind kind = InnovationKind::IidNoise;
    InputLaw input = InputLaw::Gaussian;
    /// Linear shift eps^i = sum_j beta[j] xi^{i - (beta_lo + j)}.
    int beta_lo = 0;
    std::vector<double> beta;
    bool causal = false;
    std::vector<VolterraShiftTerm> volterra;
    /// Optional inner linear shift producing dependent inputs xi' = inner * xi.
    int inner_lo = 0;
    std::vector<double> inner_beta;
    KernelSpec kernel;
    std::string label = "innovations";

    /// Throws ConfigError on malformed parameters (including a non-PSD Gaussian kernel table).
    void validate() const;
    bool composed() const { return !inner_beta.empty(); }

    /// Effective linear-shift coefficients (inner composition applied), normalized to unit l2.
    std::vector<double> effective_beta(int& lo) const;
    /// Volterra weights normalized to unit l2.
    std::vector<VolterraShiftTerm> normalized_volterra() const;
    /// sup |eps| (infinity unless the inputs are bounded and the shift is not Gaussian).
    double bound() const;
};

/// eps[i][t] for i in [0, n), t in [t_min, t_min + width), stored row-major (row = i).
struct InnovationPanel {
    std::size_t n = 0;
    long t_min = 0;
    std::size_t width = 0;
    std::uint64_t seed = 0;
    std::vector<double> values;

    long t_end() const { return t_min + static_cast<long>(width); }
    double operator()(std::size_t i, long t) const {
        return values[i * width + static_cast<std::size_t>(t - t_min)];
    }
    TimeSeriesView row(std::size_t i) const { return {{values.data() + i * width, width}, t_min}; }
};

/// Precomputed generator state (normalized shift, banded Cholesky factor of a Gaussian kernel),
/// reusable across many panels of the same size.
class PanelGenerator {
public:
    PanelGenerator(const InnovationGeneratorSpec& spec, std::size_t n);

    InnovationPanel generate(long t_begin, long t_end, std::uint64_t seed) const;
    /// One column (fixed t) of length n; xi is scratch space.
    void fill_column(long t, std::uint64_t seed, std::span<double> out, std::vector<double>& xi) const;

    const InnovationGeneratorSpec& spec() const { return spec_; }
    std::size_t n() const { return n_; }

private:
    void factor_banded();

    InnovationGeneratorSpec spec_;
    std::size_t n_ = 0;
    int beta_lo_ = 0;
    std::vector<double> beta_;
    std::vector<VolterraShiftTerm> terms_;
    int reach_lo_ = 0;
    int reach_hi_ = 0;
    std::size_t band_ = 0;
    std::vector<double> chol_;
};

/// Columns are independent; column t is seeded from (seed, label, t), so a panel over a wider time
/// range contains the narrower one.
InnovationPanel generate_panel(const InnovationGeneratorSpec& spec, std::size_t n, long t_begin,
                               long t_end, std::uint64_t seed);

struct InteractionKernel {
    KernelSpec spec;            ///< evaluates chi at any lag
    std::vector<double> chi;    ///< chi(0..r_max)
    std::vector<double> l1_partial;  ///< sum_{|r| <= R} |chi(r)| for R = 0..r_max
    bool summable = true;
    bool nonnegative = true;
    std::vector<double> s;      ///< s_k for k = 1..s.size(); empty when not summable
    double tolerance = 1e-10;
    std::string note;

    double at(long r) const { return spec.at(r); }
    long support() const { return spec.support(); }
    /// s_k = 2 sum_{i>=1} chi(i)^k; DomainError when chi is not summable.
    double s_k(int k) const;
};

/// chi of an arbitrary kernel description.
InteractionKernel make_kernel(const KernelSpec& spec, int r_max = 64, int k_count = 16,
                              double tolerance = 1e-10);
InteractionKernel theoretical_chi(const InnovationGeneratorSpec& spec, int r_max = 64,
                                  int k_count = 16, double tolerance = 1e-10);

/// Minimum eigenvalue of the (order x order) Toeplitz matrix of chi(0..order-1).
double toeplitz_min_eigenvalue(std::span<const double> chi, std::size_t order);

enum class WeakDepFamily { Lambda, Eta, Theta, Kappa, KappaPrime };
std::string_view to_string(WeakDepFamily family);
WeakDepFamily weak_dep_family_from_string(std::string_view name);

/// psi(u, v, a, b) of the family; u and v are the (weighted) block sizes.
double psi(WeakDepFamily family, double u, double v, double a, double b);

/// Decay bound indexed by the separation s = j_1 - i_u between index blocks.
struct DependenceProfile {
    WeakDepFamily family = WeakDepFamily::Eta;
    std::vector<double> bound;  ///< s = 0..r_max
    std::string provenance;
    bool empirical_only = false;

    /// Bound at separation s; beyond r_max the last value is reused (the bound is nonincreasing).
    double at(long s) const;
};

DependenceProfile dependence_profile(const InnovationGeneratorSpec& spec, int r_max);

/// (sum_{|l| >= r} beta_l^2)^{1/2} for normalized beta starting at lag beta_lo.
double linear_innovation_tail(std::span<const double> beta, int beta_lo, int r);

struct ChiEstimate {
    long r = 0;
    double value = 0.0;
    double stderr_ = 0.0;
};

/// Average of eps^i_t eps^{i+r}_t over i in [i_begin, i_end - r), all t and all panels; the standard
/// error treats each (panel, t) column as one replicate.
std::vector<ChiEstimate> estimate_chi(std::span<const InnovationPanel> panels, long r_max,
                                      std::size_t i_begin = 0,
                                      std::size_t i_end = std::numeric_limits<std::size_t>::max());

struct ChiDecayReport {
    double exponent = 1.0;
    double constant = 0.0;      ///< smallest C with |chi(r)| <= C eps(r)^exponent, r = 1..r_max
    std::vector<double> ratio;  ///< per r (index r), NaN where eps(r) == 0
    std::vector<long> violations;  ///< r with eps(r) == 0 but chi(r) != 0
    bool ok() const { return violations.empty(); }
};

ChiDecayReport check_chi_decay(const DependenceProfile& profile, const InteractionKernel& kernel,
                               double delta);

}  // namespace dsagg
