#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dsagg/errors.hpp"
#include "dsagg/innovations.hpp"
#include "dsagg/parallel.hpp"

using namespace dsagg;

namespace {

InnovationGeneratorSpec linear_shift(int lo, std::vector<double> beta) {
    InnovationGeneratorSpec s;
    s.kind = InnovationKind::LinearShift;
    s.beta_lo = lo;
    s.beta = std::move(beta);
    return s;
}

InnovationGeneratorSpec gaussian_geometric(double rate) {
    InnovationGeneratorSpec s;
    s.kind = InnovationKind::GaussianStationary;
    s.kernel.kind = KernelSpec::Kind::Geometric;
    s.kernel.rate = rate;
    return s;
}

// sum_l beta_l beta_{l+r} after normalization
double conv_oracle(const std::vector<double>& beta, long r) {
    const double n2 = std::inner_product(beta.begin(), beta.end(), beta.begin(), 0.0);
    double s = 0.0;
    for (std::size_t a = 0; a < beta.size(); ++a) {
        const long b = static_cast<long>(a) + r;
        if (b >= 0 && b < static_cast<long>(beta.size())) s += beta[a] * beta[static_cast<std::size_t>(b)];
    }
    return s / n2;
}

std::vector<InnovationPanel> panels(const InnovationGeneratorSpec& spec, std::size_t n, long width,
                                    std::size_t count, std::uint64_t seed) {
    std::vector<InnovationPanel> out;
    for (std::size_t k = 0; k < count; ++k) out.push_back(generate_panel(spec, n, 0, width, seed + k));
    return out;
}

}  // namespace

TEST_CASE("theoretical chi") {
    InnovationGeneratorSpec iid;
    const auto k0 = theoretical_chi(iid);
    CHECK(k0.summable);
    CHECK(k0.at(0) == 1.0);
    CHECK(k0.at(1) == 0.0);
    for (int k = 1; k <= 5; ++k) CHECK(k0.s_k(k) == 0.0);

    const auto kg = theoretical_chi(gaussian_geometric(0.5));
    CHECK(kg.s_k(1) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(kg.s_k(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

    const double h = 1.0 / std::sqrt(2.0);
    const auto kl = theoretical_chi(linear_shift(0, {h, h}));
    CHECK(kl.at(1) == doctest::Approx(0.5));
    CHECK(kl.at(-1) == doctest::Approx(0.5));
    CHECK(kl.at(2) == 0.0);

    const std::vector<double> beta{0.3, -0.5, 1.0, 0.2, 0.7};
    const auto kb = theoretical_chi(linear_shift(-2, beta));
    for (long r = -6; r <= 6; ++r) CHECK(kb.at(r) == doctest::Approx(conv_oracle(beta, r)).epsilon(1e-12));

    InnovationGeneratorSpec common;
    common.kind = InnovationKind::GaussianStationary;
    common.kernel.kind = KernelSpec::Kind::Constant;
    const auto kc = theoretical_chi(common);
    CHECK_FALSE(kc.summable);
    CHECK(kc.s.empty());
    CHECK_THROWS_AS(kc.s_k(1), DomainError);
}

TEST_CASE("kernel invariants hold for every generator") {
    InnovationGeneratorSpec vol;
    vol.kind = InnovationKind::VolterraShift;
    vol.volterra = {{{0}, 1.0}, {{-1, 1}, 0.5}, {{0, 2}, 0.3}};
    const std::vector<InnovationGeneratorSpec> specs{
        InnovationGeneratorSpec{}, linear_shift(-2, {0.25, 0.5, 1.0, 0.5, 0.25}), gaussian_geometric(0.7), vol};
    for (const auto& s : specs) {
        const auto k = theoretical_chi(s);
        CHECK(k.at(0) == doctest::Approx(1.0));
        for (long r = 0; r <= 20; ++r) CHECK(std::abs(k.at(r)) <= 1.0 + 1e-12);
        for (double v : k.s) CHECK(v >= -1.0);
        std::vector<double> chi;
        for (long r = 0; r <= 20; ++r) chi.push_back(k.at(r));
        CHECK(toeplitz_min_eigenvalue(chi, 21) >= -1e-10);
    }
}

TEST_CASE("non psd tables are rejected") {
    InnovationGeneratorSpec s;
    s.kind = InnovationKind::GaussianStationary;
    s.kernel.table = {1.0, 0.9, 0.0};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS(generate_panel(s, 10, 0, 4, 1), ConfigError);
}

TEST_CASE("dependence profiles") {
    const auto iid = dependence_profile(InnovationGeneratorSpec{}, 8);
    CHECK(iid.bound[0] > 0.0);
    for (int r = 1; r <= 8; ++r) CHECK(iid.bound[static_cast<std::size_t>(r)] == 0.0);

    // beta_l proportional to 2^{-|l|} on |l| <= 6
    std::vector<double> beta;
    for (int l = -6; l <= 6; ++l) beta.push_back(std::pow(2.0, -std::abs(l)));
    const double n2 = std::inner_product(beta.begin(), beta.end(), beta.begin(), 0.0);
    double t4 = 0.0;
    for (int l = -6; l <= 6; ++l)
        if (std::abs(l) >= 4) t4 += std::pow(4.0, -std::abs(l)) / n2;
    std::vector<double> normalized = beta;
    for (double& v : normalized) v /= std::sqrt(n2);
    CHECK(linear_innovation_tail(normalized, -6, 4) == doctest::Approx(std::sqrt(t4)).epsilon(1e-12));

    const auto p = dependence_profile(linear_shift(-6, beta), 20);
    CHECK(p.family == WeakDepFamily::Eta);
    for (int s = 0; s <= 20; ++s) {
        CHECK(p.bound[static_cast<std::size_t>(s)] ==
              doctest::Approx(2.0 * linear_innovation_tail(normalized, -6, (s + 1) / 2)).epsilon(1e-12));
        if (s > 0) CHECK(p.bound[static_cast<std::size_t>(s)] <= p.bound[static_cast<std::size_t>(s - 1)]);
        if (s > 12) CHECK(p.bound[static_cast<std::size_t>(s)] == 0.0);
    }

    const auto g = dependence_profile(gaussian_geometric(0.5), 10);
    CHECK(g.family == WeakDepFamily::Kappa);
    for (int r = 1; r <= 10; ++r) CHECK(g.bound[static_cast<std::size_t>(r)] == doctest::Approx(std::pow(0.5, r)));

    InnovationGeneratorSpec composed = linear_shift(0, {1.0, 1.0});
    composed.inner_beta = {1.0, 0.5};
    CHECK(dependence_profile(composed, 4).empirical_only);
}

TEST_CASE("chi decay constants") {
    const auto iid = check_chi_decay(dependence_profile(InnovationGeneratorSpec{}, 10),
                                     theoretical_chi(InnovationGeneratorSpec{}), 1.0);
    CHECK(iid.ok());
    CHECK(iid.constant == 0.0);

    const auto gs = gaussian_geometric(0.5);
    const auto g = check_chi_decay(dependence_profile(gs, 16), theoretical_chi(gs, 16), 1.0);
    CHECK(g.ok());
    CHECK(g.exponent == 1.0);
    CHECK(g.constant == doctest::Approx(1.0));

    std::vector<double> beta;
    for (int l = -4; l <= 4; ++l) beta.push_back(std::pow(2.0, -std::abs(l)));
    const auto ls = linear_shift(-4, beta);
    const auto l = check_chi_decay(dependence_profile(ls, 16), theoretical_chi(ls, 16), 1.0);
    CHECK(l.ok());
    CHECK(l.exponent == doctest::Approx(0.5));
    CHECK(std::isfinite(l.constant));
    CHECK(l.constant > 0.0);

    // a kernel reaching further than the profile is a violation
    const auto bad = check_chi_decay(dependence_profile(InnovationGeneratorSpec{}, 10), theoretical_chi(ls, 10), 1.0);
    CHECK_FALSE(bad.ok());
}

TEST_CASE("empirical chi matches the theory") {
    const double h = 1.0 / std::sqrt(2.0);
    const auto ps = panels(linear_shift(0, {h, h}), 64, 200, 10, 1000);
    const auto est = estimate_chi(ps, 3);
    CHECK(std::abs(est[0].value - 1.0) < 3.0 * est[0].stderr_);
    CHECK(std::abs(est[1].value - 0.5) < 3.0 * est[1].stderr_);
    CHECK(std::abs(est[2].value) < 3.0 * est[2].stderr_);

    const auto gi = panels(InnovationGeneratorSpec{}, 64, 200, 10, 2000);
    const auto e0 = estimate_chi(gi, 1);
    CHECK(std::abs(e0[1].value) < 3.0 * e0[1].stderr_);

    const auto gg = panels(gaussian_geometric(0.5), 64, 200, 10, 3000);
    const auto eg = estimate_chi(gg, 2);
    CHECK(std::abs(eg[0].value - 1.0) < 3.0 * eg[0].stderr_);
    CHECK(std::abs(eg[2].value - 0.25) < 3.0 * eg[2].stderr_);

    CHECK_THROWS_AS(estimate_chi(gi, 64), IndexError);
}

TEST_CASE("columns are independent in time") {
    const auto p = generate_panel(linear_shift(-1, {0.5, 1.0, 0.5}), 200, 0, 400, 8);
    // per-column products of adjacent times, averaged over i; one replicate per column pair
    std::vector<double> col;
    for (long t = 0; t + 1 < 400; t += 2) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.n; ++i) s += p(i, t) * p(i, t + 1);
        col.push_back(s / static_cast<double>(p.n));
    }
    double m = 0.0;
    for (double v : col) m += v;
    m /= static_cast<double>(col.size());
    double sd = 0.0;
    for (double v : col) sd += (v - m) * (v - m);
    const double se = std::sqrt(sd / static_cast<double>(col.size() - 1) / static_cast<double>(col.size()));
    CHECK(std::abs(m) < 3.0 * se);
}

TEST_CASE("chi is stationary across the index") {
    const auto ps = panels(linear_shift(0, {1.0, 0.8, -0.3}), 128, 100, 8, 12);
    const auto lo = estimate_chi(ps, 2, 0, 64);
    const auto hi = estimate_chi(ps, 2, 64, 128);
    for (std::size_t r = 0; r <= 2; ++r)
        CHECK(std::abs(lo[r].value - hi[r].value) < 3.0 * std::hypot(lo[r].stderr_, hi[r].stderr_));
}

TEST_CASE("panels are nested and thread independent") {
    const auto spec = gaussian_geometric(0.6);
    set_thread_budget(1);
    const auto a = generate_panel(spec, 50, -5, 20, 77);
    set_thread_budget(4);
    const auto b = generate_panel(spec, 50, -5, 20, 77);
    set_thread_budget(0);
    CHECK(a.values == b.values);
    const auto narrow = generate_panel(spec, 50, 0, 10, 77);
    for (std::size_t i = 0; i < 50; ++i)
        for (long t = 0; t < 10; ++t) CHECK(narrow(i, t) == a(i, t));
}
