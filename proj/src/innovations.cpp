#include "dsagg/innovations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "dsagg/errors.hpp"
#include "dsagg/parallel.hpp"
#include "dsagg/rng.hpp"

namespace dsagg {

namespace {

template <class E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
    for (const auto& [e, n] : table)
        if (e == v) return n;
    return "unknown";
}

template <class E, std::size_t N>
E parse_name(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view name,
             const char* what) {
    for (const auto& [e, n] : table)
        if (n == name) return e;
    throw ConfigError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

constexpr std::array<std::pair<InnovationKind, std::string_view>, 4> kKinds{{
    {InnovationKind::IidNoise, "iid"},
    {InnovationKind::LinearShift, "linear_shift"},
    {InnovationKind::VolterraShift, "volterra_shift"},
    {InnovationKind::GaussianStationary, "gaussian_stationary"},
}};
constexpr std::array<std::pair<InputLaw, std::string_view>, 3> kLaws{{
    {InputLaw::Gaussian, "gaussian"},
    {InputLaw::Rademacher, "rademacher"},
    {InputLaw::CenteredUniform, "uniform"},
}};
constexpr std::array<std::pair<KernelSpec::Kind, std::string_view>, 4> kKernels{{
    {KernelSpec::Kind::Table, "table"},
    {KernelSpec::Kind::Geometric, "geometric"},
    {KernelSpec::Kind::PowerLaw, "power_law"},
    {KernelSpec::Kind::Constant, "constant"},
}};
constexpr std::array<std::pair<WeakDepFamily, std::string_view>, 5> kFamilies{{
    {WeakDepFamily::Lambda, "lambda"},
    {WeakDepFamily::Eta, "eta"},
    {WeakDepFamily::Theta, "theta"},
    {WeakDepFamily::Kappa, "kappa"},
    {WeakDepFamily::KappaPrime, "kappa_prime"},
}};

double sum_sq(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

std::string_view to_string(InnovationKind kind) { return name_of(kKinds, kind); }
std::string_view to_string(InputLaw law) { return name_of(kLaws, law); }
std::string_view to_string(KernelSpec::Kind kind) { return name_of(kKernels, kind); }
std::string_view to_string(WeakDepFamily family) { return name_of(kFamilies, family); }
InnovationKind innovation_kind_from_string(std::string_view name) {
    return parse_name(kKinds, name, "innovation kind");
}
InputLaw input_law_from_string(std::string_view name) { return parse_name(kLaws, name, "input law"); }
KernelSpec::Kind kernel_kind_from_string(std::string_view name) {
    return parse_name(kKernels, name, "kernel kind");
}
WeakDepFamily weak_dep_family_from_string(std::string_view name) {
    return parse_name(kFamilies, name, "dependence family");
}

double input_bound(InputLaw law) {
    switch (law) {
        case InputLaw::Gaussian:
            return std::numeric_limits<double>::infinity();
        case InputLaw::Rademacher:
            return 1.0;
        case InputLaw::CenteredUniform:
            return std::sqrt(3.0);
    }
    return std::numeric_limits<double>::infinity();
}

double KernelSpec::at(long r) const {
    r = std::labs(r);
    switch (kind) {
        case Kind::Table:
            return r < static_cast<long>(table.size()) ? table[static_cast<std::size_t>(r)] : 0.0;
        case Kind::Geometric:
            return r == 0 ? 1.0 : std::pow(rate, static_cast<double>(r));
        case Kind::PowerLaw:
            return std::pow(1.0 + static_cast<double>(r), -exponent);
        case Kind::Constant:
            return 1.0;
    }
    return 0.0;
}

long KernelSpec::support() const {
    switch (kind) {
        case Kind::Table: {
            long last = 0;
            for (std::size_t r = 0; r < table.size(); ++r)
                if (table[r] != 0.0) last = static_cast<long>(r);
            return last;
        }
        case Kind::Geometric:
            return rate == 0.0 ? 0 : -1;
        case Kind::PowerLaw:
        case Kind::Constant:
            return -1;
    }
    return -1;
}

double toeplitz_min_eigenvalue(std::span<const double> chi, std::size_t order) {
    if (order == 0) return 0.0;
    Eigen::MatrixXd t(static_cast<Eigen::Index>(order), static_cast<Eigen::Index>(order));
    for (std::size_t i = 0; i < order; ++i)
        for (std::size_t j = 0; j < order; ++j) {
            const std::size_t r = i > j ? i - j : j - i;
            t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r < chi.size() ? chi[r] : 0.0;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

void InnovationGeneratorSpec::validate() const {
    auto finite_all = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    switch (kind) {
        case InnovationKind::IidNoise:
            break;
        case InnovationKind::LinearShift: {
            if (beta.empty() || !finite_all(beta) || sum_sq(beta) == 0.0)
                throw ConfigError("linear shift needs finite, not identically zero beta");
            if (composed() && (!finite_all(inner_beta) || sum_sq(inner_beta) == 0.0))
                throw ConfigError("inner shift needs finite, not identically zero coefficients");
            int lo = 0;
            const auto eff = effective_beta(lo);
            if (causal && lo < 0) throw ConfigError("causal shift cannot use negative lags");
            break;
        }
        case InnovationKind::VolterraShift: {
            if (volterra.empty()) throw ConfigError("Volterra shift needs at least one term");
            std::map<std::vector<int>, int> seen;
            double w2 = 0.0;
            for (const auto& term : volterra) {
                if (term.offsets.empty()) throw ConfigError("Volterra term without offsets");
                for (std::size_t j = 1; j < term.offsets.size(); ++j)
                    if (term.offsets[j] <= term.offsets[j - 1])
                        throw ConfigError("Volterra offsets must be strictly increasing");
                if (causal && term.offsets.front() < 0)
                    throw ConfigError("causal shift cannot use negative offsets");
                if (!std::isfinite(term.weight)) throw ConfigError("Volterra weight is not finite");
                if (seen[term.offsets]++ > 0) throw ConfigError("duplicate Volterra offset set");
                w2 += term.weight * term.weight;
            }
            if (w2 == 0.0) throw ConfigError("Volterra weights are all zero");
            break;
        }
        case InnovationKind::GaussianStationary: {
            switch (kernel.kind) {
                case KernelSpec::Kind::Table: {
                    if (kernel.table.empty() || std::abs(kernel.table[0] - 1.0) > 1e-12)
                        throw ConfigError("kernel table must start with chi(0) = 1");
                    for (double v : kernel.table)
                        if (!std::isfinite(v) || std::abs(v) > 1.0 + 1e-12)
                            throw ConfigError("kernel table entries must satisfy |chi(r)| <= 1");
                    if (toeplitz_min_eigenvalue(kernel.table, kernel.table.size()) < -1e-10)
                        throw ConfigError("kernel table is not positive semidefinite");
                    break;
                }
                case KernelSpec::Kind::Geometric:
                    if (!(std::abs(kernel.rate) < 1.0))
                        throw ConfigError("geometric kernel needs |rate| < 1 (use 'constant' for rate 1)");
                    break;
                case KernelSpec::Kind::PowerLaw:
                    if (!(kernel.exponent > 0.0)) throw ConfigError("power-law exponent must be positive");
                    break;
                case KernelSpec::Kind::Constant:
                    break;
            }
            break;
        }
    }
}

std::vector<double> InnovationGeneratorSpec::effective_beta(int& lo) const {
    std::vector<double> b;
    if (kind == InnovationKind::IidNoise) {
        lo = 0;
        return {1.0};
    }
    if (!composed()) {
        lo = beta_lo;
        b = beta;
    } else {
        // xi'^m = sum_a inner_a xi^{m - a}; eps^i = sum_l beta_l xi'^{i - l}
        lo = beta_lo + inner_lo;
        b.assign(beta.size() + inner_beta.size() - 1, 0.0);
        for (std::size_t j = 0; j < beta.size(); ++j)
            for (std::size_t a = 0; a < inner_beta.size(); ++a) b[j + a] += beta[j] * inner_beta[a];
    }
    const double norm = std::sqrt(sum_sq(b));
    if (norm == 0.0) throw ConfigError("shift coefficients are identically zero");
    for (double& v : b) v /= norm;
    return b;
}

std::vector<VolterraShiftTerm> InnovationGeneratorSpec::normalized_volterra() const {
    double w2 = 0.0;
    for (const auto& t : volterra) w2 += t.weight * t.weight;
    std::vector<VolterraShiftTerm> out = volterra;
    const double norm = std::sqrt(w2);
    for (auto& t : out) t.weight /= norm;
    return out;
}

double InnovationGeneratorSpec::bound() const {
    const double b = input_bound(input);
    switch (kind) {
        case InnovationKind::IidNoise:
            return b;
        case InnovationKind::LinearShift: {
            int lo = 0;
            double s = 0.0;
            for (double v : effective_beta(lo)) s += std::abs(v);
            return s * b;
        }
        case InnovationKind::VolterraShift: {
            double s = 0.0;
            for (const auto& t : normalized_volterra())
                s += std::abs(t.weight) * std::pow(b, static_cast<double>(t.offsets.size()));
            return s;
        }
        case InnovationKind::GaussianStationary:
            return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

// ---- generation -----------------------------------------------------------------------------

PanelGenerator::PanelGenerator(const InnovationGeneratorSpec& spec, std::size_t n)
    : spec_(spec), n_(n) {
    if (n == 0) throw ContractError("generate_panel: n must be at least 1");
    spec_.validate();
    switch (spec_.kind) {
        case InnovationKind::IidNoise:
            reach_lo_ = reach_hi_ = 0;
            break;
        case InnovationKind::LinearShift:
            beta_ = spec_.effective_beta(beta_lo_);
            reach_lo_ = beta_lo_;
            reach_hi_ = beta_lo_ + static_cast<int>(beta_.size()) - 1;
            break;
        case InnovationKind::VolterraShift:
            terms_ = spec_.normalized_volterra();
            reach_lo_ = terms_.front().offsets.front();
            reach_hi_ = terms_.front().offsets.back();
            for (const auto& t : terms_) {
                reach_lo_ = std::min(reach_lo_, t.offsets.front());
                reach_hi_ = std::max(reach_hi_, t.offsets.back());
            }
            break;
        case InnovationKind::GaussianStationary:
            if (spec_.kernel.kind != KernelSpec::Kind::Constant) factor_banded();
            break;
    }
}

void PanelGenerator::factor_banded() {
    const KernelSpec& k = spec_.kernel;
    long band = k.support();
    if (band < 0) {
        band = 0;
        while (band + 1 < static_cast<long>(n_) && std::abs(k.at(band + 1)) >= 1e-17) ++band;
    }
    band = std::min<long>(band, static_cast<long>(n_) - 1);
    if (static_cast<double>(n_) * static_cast<double>(band + 1) > 5e7)
        throw ResourceError("Gaussian kernel band too wide for a banded factorization at this n");
    band_ = static_cast<std::size_t>(band);
    const std::size_t w = band_ + 1;
    chol_.assign(n_ * w, 0.0);
    // chol_[i * w + (j - i + band)] = L(i, j) for i - band <= j <= i
    auto at = [&](std::size_t i, std::size_t j) -> double& { return chol_[i * w + (j + band_ - i)]; };
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t j0 = i >= band_ ? i - band_ : 0;
        for (std::size_t j = j0; j <= i; ++j) {
            double s = k.at(static_cast<long>(i) - static_cast<long>(j));
            const std::size_t k0 = std::max(j0, j >= band_ ? j - band_ : 0);
            for (std::size_t q = k0; q < j; ++q) s -= at(i, q) * at(j, q);
            if (j == i) {
                if (!(s > 1e-14))
                    throw ConfigError("Gaussian kernel is not positive definite on the panel");
                at(i, j) = std::sqrt(s);
            } else {
                at(i, j) = s / at(j, j);
            }
        }
    }
}

namespace {

void draw_inputs(InputLaw law, Rng& rng, std::vector<double>& xi) {
    switch (law) {
        case InputLaw::Gaussian: {
            std::normal_distribution<double> g(0.0, 1.0);
            for (double& v : xi) v = g(rng);
            break;
        }
        case InputLaw::Rademacher:
            for (double& v : xi) v = (rng() >> 63) ? 1.0 : -1.0;
            break;
        case InputLaw::CenteredUniform: {
            std::uniform_real_distribution<double> u(-std::sqrt(3.0), std::sqrt(3.0));
            for (double& v : xi) v = u(rng);
            break;
        }
    }
}

}  // namespace

void PanelGenerator::fill_column(long t, std::uint64_t seed, std::span<double> out,
                                 std::vector<double>& xi) const {
    Rng rng = make_rng(seed, spec_.label, static_cast<std::uint64_t>(t));
    switch (spec_.kind) {
        case InnovationKind::IidNoise:
            xi.resize(n_);
            draw_inputs(spec_.input, rng, xi);
            std::copy(xi.begin(), xi.end(), out.begin());
            return;
        case InnovationKind::LinearShift:
        case InnovationKind::VolterraShift: {
            // xi index g lives at xi[g + reach_hi]; eps^i reads xi^{i - l} for l in [reach_lo, reach_hi]
            xi.resize(n_ + static_cast<std::size_t>(reach_hi_ - reach_lo_));
            draw_inputs(spec_.input, rng, xi);
            const long off = reach_hi_;
            for (std::size_t i = 0; i < n_; ++i) {
                const long base = static_cast<long>(i) + off;
                double acc = 0.0;
                if (spec_.kind == InnovationKind::LinearShift) {
                    for (std::size_t j = 0; j < beta_.size(); ++j)
                        acc += beta_[j] * xi[static_cast<std::size_t>(base - beta_lo_ - static_cast<long>(j))];
                } else {
                    for (const auto& term : terms_) {
                        double p = term.weight;
                        for (int l : term.offsets) p *= xi[static_cast<std::size_t>(base - l)];
                        acc += p;
                    }
                }
                out[i] = acc;
            }
            return;
        }
        case InnovationKind::GaussianStationary: {
            if (spec_.kernel.kind == KernelSpec::Kind::Constant) {
                xi.resize(1);
                draw_inputs(InputLaw::Gaussian, rng, xi);
                std::fill(out.begin(), out.end(), xi[0]);
                return;
            }
            xi.resize(n_);
            draw_inputs(InputLaw::Gaussian, rng, xi);
            const std::size_t w = band_ + 1;
            for (std::size_t i = 0; i < n_; ++i) {
                const std::size_t j0 = i >= band_ ? i - band_ : 0;
                double acc = 0.0;
                for (std::size_t j = j0; j <= i; ++j) acc += chol_[i * w + (j + band_ - i)] * xi[j];
                out[i] = acc;
            }
            return;
        }
    }
}

InnovationPanel PanelGenerator::generate(long t_begin, long t_end, std::uint64_t seed) const {
    if (t_end <= t_begin) throw ContractError("generate_panel: empty time range");
    InnovationPanel p;
    p.n = n_;
    p.t_min = t_begin;
    p.width = static_cast<std::size_t>(t_end - t_begin);
    p.seed = seed;
    p.values.assign(p.n * p.width, 0.0);
    parallel_for(p.width, [&](std::size_t c) {
        std::vector<double> col(n_), xi;
        fill_column(t_begin + static_cast<long>(c), seed, col, xi);
        for (std::size_t i = 0; i < n_; ++i) p.values[i * p.width + c] = col[i];
    });
    return p;
}

InnovationPanel generate_panel(const InnovationGeneratorSpec& spec, std::size_t n, long t_begin,
                               long t_end, std::uint64_t seed) {
    return PanelGenerator(spec, n).generate(t_begin, t_end, seed);
}

// ---- kernels and profiles ---------------------------------------------------------------------

double InteractionKernel::s_k(int k) const {
    if (!summable) throw DomainError("interaction kernel is not summable (common innovation case)");
    if (k < 1) throw ContractError("s_k needs k >= 1");
    switch (spec.kind) {
        case KernelSpec::Kind::Table: {
            double s = 0.0;
            for (std::size_t i = 1; i < spec.table.size(); ++i) s += std::pow(spec.table[i], k);
            return 2.0 * s;
        }
        case KernelSpec::Kind::Geometric: {
            const double q = std::pow(spec.rate, k);
            return 2.0 * q / (1.0 - q);
        }
        case KernelSpec::Kind::PowerLaw: {
            const double p = spec.exponent * k;
            double s = 0.0;
            long i = 1;
            constexpr long kMaxTerms = 10'000'000;
            for (; i <= kMaxTerms; ++i) {
                s += std::pow(1.0 + static_cast<double>(i), -p);
                const double tail = std::pow(2.0 + static_cast<double>(i), 1.0 - p) / (p - 1.0);
                if (tail < tolerance) return 2.0 * s;
            }
            // midpoint integral estimate of the remaining tail
            return 2.0 * (s + std::pow(1.5 + static_cast<double>(i), 1.0 - p) / (p - 1.0));
        }
        case KernelSpec::Kind::Constant:
            break;
    }
    throw DomainError("interaction kernel is not summable");
}

InteractionKernel make_kernel(const KernelSpec& spec, int r_max, int k_count, double tolerance) {
    InteractionKernel k;
    k.spec = spec;
    k.tolerance = tolerance;
    double l1 = 0.0;
    for (int r = 0; r <= r_max; ++r) {
        const double v = spec.at(r);
        k.chi.push_back(v);
        l1 += r == 0 ? std::abs(v) : 2.0 * std::abs(v);
        k.l1_partial.push_back(l1);
        if (v < 0.0) k.nonnegative = false;
    }
    switch (spec.kind) {
        case KernelSpec::Kind::Table:
            for (double v : spec.table)
                if (v < 0.0) k.nonnegative = false;
            break;
        case KernelSpec::Kind::Geometric:
            k.summable = std::abs(spec.rate) < 1.0;
            if (spec.rate < 0.0) k.nonnegative = false;
            break;
        case KernelSpec::Kind::PowerLaw:
            k.summable = spec.exponent > 1.0;
            break;
        case KernelSpec::Kind::Constant:
            k.summable = false;
            break;
    }
    if (!k.summable) {
        k.note = spec.kind == KernelSpec::Kind::Constant
                     ? "common innovation: chi(r) = 1 is not summable"
                     : "chi is not summable; s_k withheld";
        return k;
    }
    for (int j = 1; j <= k_count; ++j) k.s.push_back(k.s_k(j));
    return k;
}

InteractionKernel theoretical_chi(const InnovationGeneratorSpec& spec, int r_max, int k_count,
                                  double tolerance) {
    spec.validate();
    KernelSpec ks;
    switch (spec.kind) {
        case InnovationKind::IidNoise:
            ks.table = {1.0};
            break;
        case InnovationKind::LinearShift: {
            int lo = 0;
            const auto b = spec.effective_beta(lo);
            ks.table.assign(b.size(), 0.0);
            for (std::size_t r = 0; r < b.size(); ++r)
                for (std::size_t j = 0; j + r < b.size(); ++j) ks.table[r] += b[j] * b[j + r];
            ks.table[0] = 1.0;
            break;
        }
        case InnovationKind::VolterraShift: {
            const auto terms = spec.normalized_volterra();
            std::map<std::vector<int>, double> weight;
            int span = 0;
            for (const auto& t : terms) {
                weight[t.offsets] = t.weight;
                span = std::max(span, t.offsets.back() - t.offsets.front());
            }
            int lo = terms.front().offsets.front(), hi = terms.front().offsets.back();
            for (const auto& t : terms) {
                lo = std::min(lo, t.offsets.front());
                hi = std::max(hi, t.offsets.back());
            }
            ks.table.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
            // E[prod xi^{i-l} prod xi^{i+r-l'}] = 1 iff the offset sets satisfy l' = l + r
            for (int r = 0; r <= hi - lo; ++r) {
                double acc = 0.0;
                for (const auto& t : terms) {
                    std::vector<int> shifted = t.offsets;
                    for (int& l : shifted) l += r;
                    const auto it = weight.find(shifted);
                    if (it != weight.end()) acc += t.weight * it->second;
                }
                ks.table[static_cast<std::size_t>(r)] = acc;
            }
            ks.table[0] = 1.0;
            break;
        }
        case InnovationKind::GaussianStationary:
            ks = spec.kernel;
            break;
    }
    return make_kernel(ks, r_max, k_count, tolerance);
}

double psi(WeakDepFamily family, double u, double v, double a, double b) {
    switch (family) {
        case WeakDepFamily::Lambda:
            return a * u + b * v + a * b * u * v;
        case WeakDepFamily::Eta:
            return a * u + b * v;
        case WeakDepFamily::Theta:
            return b * v;
        case WeakDepFamily::Kappa:
            return a * b * u * v;
        case WeakDepFamily::KappaPrime:
            return a * b * v;
    }
    return 0.0;
}

double DependenceProfile::at(long s) const {
    if (bound.empty()) return std::numeric_limits<double>::quiet_NaN();
    s = std::max(0L, s);
    return s < static_cast<long>(bound.size()) ? bound[static_cast<std::size_t>(s)] : bound.back();
}

double linear_innovation_tail(std::span<const double> beta, int beta_lo, int r) {
    double s = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) {
        const int l = beta_lo + static_cast<int>(j);
        if (std::abs(l) >= r) s += beta[j] * beta[j];
    }
    return std::sqrt(s);
}

DependenceProfile dependence_profile(const InnovationGeneratorSpec& spec, int r_max) {
    spec.validate();
    DependenceProfile p;
    const auto half = [](int s) { return (s + 1) / 2; };
    switch (spec.kind) {
        case InnovationKind::IidNoise:
        case InnovationKind::LinearShift: {
            if (spec.composed()) {
                p.family = WeakDepFamily::Eta;
                p.empirical_only = true;
                p.provenance = "dependent inputs: no closed-form rate, estimate empirically";
                return p;
            }
            int lo = 0;
            const auto b = spec.effective_beta(lo);
            const bool causal = spec.kind == InnovationKind::LinearShift && spec.causal;
            p.family = causal ? WeakDepFamily::Theta : WeakDepFamily::Eta;
            p.provenance = causal ? "causal linear shift: theta(s) = 2 (sum_{l>=s} beta_l^2)^{1/2}"
                                  : "linear shift: eta(s) = 2 (sum_{|l|>=ceil(s/2)} beta_l^2)^{1/2}";
            for (int s = 0; s <= r_max; ++s) {
                double t = 0.0;
                for (std::size_t j = 0; j < b.size(); ++j) {
                    const int l = lo + static_cast<int>(j);
                    const bool outside = causal ? l >= s : std::abs(l) >= half(s);
                    if (outside) t += b[j] * b[j];
                }
                p.bound.push_back(2.0 * std::sqrt(t));
            }
            return p;
        }
        case InnovationKind::VolterraShift: {
            p.family = WeakDepFamily::Eta;
            p.provenance = "Volterra shift: eta(s) = 2 (mass of terms reaching |l| >= ceil(s/2))^{1/2}";
            const auto terms = spec.normalized_volterra();
            for (int s = 0; s <= r_max; ++s) {
                double t = 0.0;
                for (const auto& term : terms) {
                    const bool reaches = std::any_of(term.offsets.begin(), term.offsets.end(),
                                                     [&](int l) { return std::abs(l) >= half(s); });
                    if (reaches) t += term.weight * term.weight;
                }
                p.bound.push_back(2.0 * std::sqrt(t));
            }
            return p;
        }
        case InnovationKind::GaussianStationary: {
            p.family = WeakDepFamily::Kappa;
            const auto k = make_kernel(spec.kernel, r_max + 1, 1);
            p.provenance = k.nonnegative ? "Gaussian, associated: kappa(s) = sup_{j>=s} |chi(j)|"
                                         : "Gaussian, not associated: kappa(s) = sup_{j>=s} |chi(j)|";
            // sup over j >= s; beyond r_max the closed families are nonincreasing in |chi|
            const long sup_reach = spec.kernel.kind == KernelSpec::Kind::Table
                                       ? static_cast<long>(spec.kernel.table.size())
                                       : static_cast<long>(r_max) + 1;
            std::vector<double> sup(static_cast<std::size_t>(std::max<long>(sup_reach, r_max + 1) + 1), 0.0);
            for (long j = static_cast<long>(sup.size()) - 1; j >= 0; --j) {
                const double v = std::abs(spec.kernel.at(j));
                sup[static_cast<std::size_t>(j)] =
                    j + 1 < static_cast<long>(sup.size()) ? std::max(v, sup[static_cast<std::size_t>(j + 1)]) : v;
            }
            for (int s = 0; s <= r_max; ++s) p.bound.push_back(sup[static_cast<std::size_t>(s)]);
            return p;
        }
    }
    return p;
}

std::vector<ChiEstimate> estimate_chi(std::span<const InnovationPanel> panels, long r_max,
                                      std::size_t i_begin, std::size_t i_end) {
    if (panels.empty()) throw ContractError("estimate_chi: no panels");
    std::size_t columns = 0;
    for (const auto& p : panels) columns += p.width;
    if (columns < 2) throw ContractError("estimate_chi: need at least two replicate columns");
    std::vector<ChiEstimate> out;
    for (long r = 0; r <= r_max; ++r) {
        std::vector<double> col_means;
        col_means.reserve(columns);
        for (const auto& p : panels) {
            const std::size_t hi = std::min(i_end, p.n);
            if (i_begin >= hi || static_cast<std::size_t>(r) >= hi - i_begin)
                throw IndexError("estimate_chi: lag exceeds the cross-section");
            const std::size_t count = hi - i_begin - static_cast<std::size_t>(r);
            for (std::size_t c = 0; c < p.width; ++c) {
                double acc = 0.0;
                for (std::size_t i = i_begin; i < i_begin + count; ++i)
                    acc += p.values[i * p.width + c] * p.values[(i + static_cast<std::size_t>(r)) * p.width + c];
                col_means.push_back(acc / static_cast<double>(count));
            }
        }
        const double n = static_cast<double>(col_means.size());
        const double mean = std::accumulate(col_means.begin(), col_means.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : col_means) ss += (v - mean) * (v - mean);
        out.push_back({r, mean, std::sqrt(ss / (n - 1.0) / n)});
    }
    return out;
}

ChiDecayReport check_chi_decay(const DependenceProfile& profile, const InteractionKernel& kernel,
                               double delta) {
    if (profile.empirical_only || profile.bound.empty())
        throw ContractError("check_chi_decay: profile has no theoretical bound");
    if (!(delta > 0.0)) throw ContractError("check_chi_decay: delta must be positive");
    ChiDecayReport rep;
    const bool kappa_like = profile.family == WeakDepFamily::Kappa || profile.family == WeakDepFamily::KappaPrime;
    rep.exponent = kappa_like ? 1.0 : delta / (1.0 + delta);
    const long r_max = static_cast<long>(profile.bound.size()) - 1;
    rep.ratio.assign(static_cast<std::size_t>(r_max + 1), std::numeric_limits<double>::quiet_NaN());
    for (long r = 1; r <= r_max; ++r) {
        const double chi = std::abs(kernel.at(r));
        const double eps = profile.at(r);
        if (eps == 0.0) {
            if (chi > 1e-15) rep.violations.push_back(r);
            continue;
        }
        const double ratio = chi / std::pow(eps, rep.exponent);
        rep.ratio[static_cast<std::size_t>(r)] = ratio;
        rep.constant = std::max(rep.constant, ratio);
    }
    return rep;
}

}  // namespace dsagg
