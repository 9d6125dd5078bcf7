#include <doctest.h>

#include <cmath>
#include <random>

#include "dsagg/aggregation.hpp"
#include "dsagg/errors.hpp"

using namespace dsagg;

namespace {

const std::vector<double> kY{0.0};
const AffineMap kIdentity{0.0, {1.0}};

EnvironmentSpec point_mass(double v) {
    EnvironmentSpec e;
    e.coords = {CoordinateLaw{}};
    e.coords[0].value = v;
    return e;
}

EnvironmentSpec uniform(double lo, double hi) {
    EnvironmentSpec e;
    e.family = MarginalFamily::UniformBox;
    e.coords = {CoordinateLaw{}};
    e.coords[0].lo = lo;
    e.coords[0].hi = hi;
    return e;
}

KernelSpec table(std::vector<double> t) {
    KernelSpec k;
    k.table = std::move(t);
    return k;
}

KernelSpec geometric(double rate) {
    KernelSpec k;
    k.kind = KernelSpec::Kind::Geometric;
    k.rate = rate;
    return k;
}

ChaosCoefficients linear_coeffs(std::vector<double> c, int lo = 0) {
    return volterra_coefficients(LinearModel{SequenceMap::finite(lo, std::move(c))}, kY, Truncation{});
}

// N^{-1} sum_{i,j} sum_k sum_tuples c_i(t) c_j(t + tau) chi(i - j)^k via tuple lookups
double brute_gamma_n(const std::vector<ChaosCoefficients>& units, const InteractionKernel& kernel, long tau) {
    const std::size_t n = units.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double chi = kernel.at(static_cast<long>(i) - static_cast<long>(j));
            double pair = 0.0;
            for (const auto& o : units[i].orders) {
                double psi = 0.0;
                for (std::size_t u = 0; u < o.size(); ++u) {
                    std::vector<int> t(o.tuple(u).begin(), o.tuple(u).end());
                    for (int& l : t) l += static_cast<int>(tau);
                    psi += o.values[u] * units[j].find(t);
                }
                pair += psi * std::pow(chi, o.k);
            }
            total += pair;
        }
    }
    return total / static_cast<double>(n);
}

DsvStarModel random_dsv(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DsvStarModel m;
    m.terms.push_back({{0}, AffineMap{u(rng), {u(rng)}}});
    m.terms.push_back({{1}, AffineMap{u(rng), {u(rng)}}});
    m.terms.push_back({{0, 1}, AffineMap{u(rng), {u(rng)}}});
    m.terms.push_back({{0, 2}, AffineMap{u(rng), {0.0}}});
    m.terms.push_back({{1, 2, 3}, AffineMap{u(rng), {u(rng)}}});
    return m;
}

}  // namespace

TEST_CASE("aggregate sums and normalizes") {
    ElementaryPanel p;
    p.n = 4;
    p.width = 3;
    for (std::size_t i = 0; i < 4; ++i)
        for (int t = 0; t < 3; ++t) p.values.push_back(static_cast<double>(i + 1));
    const auto x = aggregate(p);
    for (double v : x.x) CHECK(v == 5.0);
    CHECK(x.b_n == 2.0);
    CHECK(aggregate(p, NormalizationRule::N).x[0] == 2.5);
    CHECK(aggregate(p, NormalizationRule::Custom, 10.0).x[0] == 1.0);

    ElementaryPanel one;
    one.n = 1;
    one.width = 3;
    one.values = {0.3, -1.2, 4.0};
    CHECK(aggregate(one).x == one.values);

    ElementaryPanel common;
    common.n = 9;
    common.width = 2;
    for (int i = 0; i < 9; ++i) common.values.insert(common.values.end(), {0.7, -0.2});
    const auto xc = aggregate(common);
    CHECK(xc.x[0] == doctest::Approx(3.0 * 0.7));
    CHECK(xc.x[1] == doctest::Approx(3.0 * -0.2));
}

TEST_CASE("psi on hand-enumerated tuples") {
    const auto e = linear_coeffs({1.0});
    CHECK(psi_tau_k(e, e, 0, 1) == 1.0);
    CHECK(psi_tau_k(e, e, 1, 1) == 0.0);
    const auto ma = linear_coeffs({1.0, 1.0});
    CHECK(psi_tau_k(ma, ma, 1, 1) == 1.0);
    CHECK(psi_tau_k(ma, ma, -1, 1) == 1.0);
    CHECK(psi_tau_k(ma, ma, 0, 1) == 2.0);
    CHECK(psi_tau_k(ma, ma, 0, 2) == 0.0);
}

TEST_CASE("gamma_n small cases") {
    Truncation tr;
    SUBCASE("two units, order one") {
        const double rho = 0.4;
        const LinearModel m{SequenceMap::finite(0, {1.0, -0.5, 0.25})};
        const auto draw = sample_environment(point_mass(0.0), 2, 1);
        const auto g = gamma_n_exact(draw, m, make_kernel(table({1.0, rho})), 0, tr);
        CHECK(g.value == doctest::Approx((1.0 + rho) * 1.3125).epsilon(1e-14));
    }
    SUBCASE("iid kernel keeps only the diagonal") {
        const LinearModel m{SequenceMap::finite(0, {1.0, 0.5}, kIdentity)};
        const auto draw = sample_environment(uniform(0.0, 1.0), 50, 2);
        const auto g = gamma_n_exact(draw, m, make_kernel(table({1.0})), 0, tr);
        double diag = 0.0;
        for (std::size_t i = 0; i < 50; ++i) diag += 1.25 * draw.at(i)[0] * draw.at(i)[0];
        CHECK(g.value == doctest::Approx(diag / 50.0).epsilon(1e-13));
    }
    SUBCASE("degenerate environment reduces to power sums of chi") {
        DsvStarModel m;
        m.terms = {{{0}, AffineMap::constant(1.0)}, {{0, 1}, AffineMap::constant(0.5)}};
        const auto kernel = make_kernel(geometric(0.6));
        const std::size_t n = 200;
        const auto draw = sample_environment(point_mass(0.3), n, 3);
        const auto g = gamma_n_exact(draw, m, kernel, 0, tr);
        // (1/N) [chi^k]_{N,1} = 1 + (2/N) sum_{r=1}^{N-1} (N - r) chi(r)^k
        double expect = 0.0;
        for (int k = 1; k <= 2; ++k) {
            double s = static_cast<double>(n);
            for (std::size_t r = 1; r < n; ++r) s += 2.0 * static_cast<double>(n - r) * std::pow(kernel.at(static_cast<long>(r)), k);
            expect += (k == 1 ? 1.0 : 0.25) * s / static_cast<double>(n);
        }
        CHECK(g.value == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("gamma_n matches the brute-force double loop") {
    std::mt19937_64 rng(42);
    const std::vector<KernelSpec> kernels{table({1.0, 0.5, -0.2}), geometric(0.5), geometric(-0.3), table({1.0})};
    Truncation tr;
    for (int c = 0; c < 4; ++c) {
        const auto model = random_dsv(rng);
        const auto kernel = make_kernel(kernels[static_cast<std::size_t>(c)]);
        const auto draw = sample_environment(uniform(-1.0, 2.0), 60, 10 + static_cast<std::uint64_t>(c));
        const auto units = unit_coefficients(model, draw, tr);
        for (long tau : {0L, 1L, -2L, 3L}) {
            const double brute = brute_gamma_n(units, kernel, tau);
            const double fast = gamma_n_exact(draw, model, kernel, tau, tr).value;
            CHECK(fast == doctest::Approx(brute).epsilon(1e-12));
        }
    }
}

TEST_CASE("banded and dense paths agree bitwise") {
    std::mt19937_64 rng(7);
    const auto model = random_dsv(rng);
    const auto draw = sample_environment(uniform(0.0, 1.0), 300, 9);
    const auto kernel = make_kernel(table({1.0, 0.4, 0.1}));
    GammaNOptions dense;
    dense.banded = false;
    for (long tau : {0L, 1L, 2L}) {
        const auto b = gamma_n_exact(draw, model, kernel, tau, Truncation{});
        const auto d = gamma_n_exact(draw, model, kernel, tau, Truncation{}, dense);
        CHECK(b.band == 2);
        CHECK(d.band == -1);
        CHECK(b.value == d.value);
    }
}

TEST_CASE("pair budget") {
    const LinearModel m{SequenceMap::finite(0, {1.0})};
    const auto draw = sample_environment(point_mass(1.0), 2000, 1);
    GammaNOptions o;
    o.banded = false;
    o.pair_budget = 1000;
    CHECK_THROWS_AS(gamma_n_exact(draw, m, make_kernel(table({1.0, 0.5})), 0, Truncation{}, o), ResourceError);
    o.banded = true;
    o.pair_budget = 10000;
    CHECK_NOTHROW(gamma_n_exact(draw, m, make_kernel(table({1.0, 0.5})), 0, Truncation{}, o));
}

TEST_CASE("gamma_n symmetry and scaling") {
    std::mt19937_64 rng(3);
    const auto model = random_dsv(rng);
    const auto draw = sample_environment(uniform(0.0, 1.0), 80, 4);
    const auto kernel = make_kernel(geometric(0.4));
    for (long tau : {1L, 2L, 3L}) {
        const double a = gamma_n_exact(draw, model, kernel, tau, Truncation{}).value;
        const double b = gamma_n_exact(draw, model, kernel, -tau, Truncation{}).value;
        CHECK(a == doctest::Approx(b).epsilon(1e-13));
    }
    // powers of two scale without rounding
    for (double s : {2.0, 0.5}) {
        DsvStarModel scaled = model;
        for (auto& t : scaled.terms) {
            t.value.base *= s;
            for (double& v : t.value.slope) v *= s;
        }
        for (long tau : {0L, 1L}) {
            const double a = gamma_n_exact(draw, model, kernel, tau, Truncation{}).value;
            const double b = gamma_n_exact(draw, scaled, kernel, tau, Truncation{}).value;
            CHECK(b == s * s * a);
        }
    }
}

TEST_CASE("gamma limit") {
    Truncation tr;
    const LinearModel unit{SequenceMap::finite(0, {1.0})};
    SUBCASE("point mass with geometric chi") {
        const auto g = gamma_limit(unit, point_mass(0.0), make_kernel(geometric(0.5)), 0, tr, 100, 1);
        CHECK(g.method == "point_mass");
        CHECK(g.value == doctest::Approx(3.0).epsilon(1e-9));
    }
    SUBCASE("iid innovations leave the diagonal") {
        const LinearModel m{SequenceMap::finite(0, {1.0}, kIdentity)};
        const auto g = gamma_limit(m, uniform(0.0, 1.0), make_kernel(table({1.0})), 0, tr, 100, 1);
        CHECK(g.method == "exact_moments");
        CHECK(g.value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("exact moments with cross terms") {
        // c_0 = y, uniform[0,1]: gamma_1 = E y^2 = 1/3, phi_1 = (E y)^2 = 1/4, s_1 = 2 rho / (1 - rho)
        const LinearModel m{SequenceMap::finite(0, {1.0}, kIdentity)};
        const auto g = gamma_limit(m, uniform(0.0, 1.0), make_kernel(geometric(0.5)), 0, tr, 100, 1);
        CHECK(g.value == doctest::Approx(1.0 / 3.0 + 0.25 * 2.0).epsilon(1e-9));
    }
    SUBCASE("monte carlo agrees with the exact path") {
        DsvStarModel m;
        m.terms = {{{0}, AffineMap{0.5, {1.0}}}, {{0, 1}, AffineMap{0.0, {0.7}}}};
        const auto kernel = make_kernel(geometric(0.5));
        const auto exact = gamma_limit(m, uniform(0.0, 1.0), kernel, 0, tr, 100, 1);
        CHECK(exact.method == "exact_moments");
        // a nonlinear map forces Monte Carlo; y^2 on [0, 1] has known moments
        LinearModel sq{SequenceMap::geometric(0, kIdentity, AffineMap{0.0, {0.5}})};
        const auto mc = gamma_limit(sq, uniform(0.0, 1.0), make_kernel(table({1.0})), 0, tr, 40000, 5);
        CHECK(mc.method == "monte_carlo");
        // sum_k y^2 (y/2)^{2k} = y^2 / (1 - y^2/4), integrated over [0, 1]
        const double exact_int = 8.0 * std::atanh(0.5) - 4.0;
        CHECK(std::abs(mc.value - exact_int) < 3.0 * mc.stderr_ + mc.truncation_bound);
    }
    SUBCASE("beyond the lag window") {
        const LinearModel m{SequenceMap::finite(0, {1.0, 0.5})};
        CHECK(gamma_limit(m, point_mass(0.0), make_kernel(geometric(0.5)), 5, tr, 100, 1).value == 0.0);
    }
    SUBCASE("common innovation is refused") {
        KernelSpec c;
        c.kind = KernelSpec::Kind::Constant;
        CHECK_THROWS_AS(gamma_limit(unit, point_mass(0.0), make_kernel(c), 0, tr, 100, 1), DomainError);
    }
}

TEST_CASE("limit covariances form a positive semidefinite sequence") {
    DsvStarModel m;
    m.terms = {{{0}, AffineMap{1.0, {0.5}}}, {{1}, AffineMap{0.6, {}}}, {{3}, AffineMap{-0.4, {0.2}}}, {{0, 2}, AffineMap{0.3, {}}}};
    const auto kernel = make_kernel(geometric(0.3));
    std::vector<double> gam;
    for (long tau = 0; tau <= 10; ++tau)
        gam.push_back(gamma_limit(m, uniform(0.0, 1.0), kernel, tau, Truncation{}, 100, 1).value);
    CHECK(gam[0] >= 0.0);
    CHECK(toeplitz_min_eigenvalue(gam, 11) >= -1e-8 * gam[0]);
}

TEST_CASE("empirical covariance") {
    Truncation tr;
    tr.m = 4;
    const std::size_t n = 40, reps = 200;
    const long width = 64;
    auto run = [&](const CoefficientModel& model, const EnvironmentSpec& env, const InnovationGeneratorSpec& inn) {
        const auto draw = sample_environment(env, n, 5);
        const auto coeffs = unit_coefficients(model, draw, tr);
        const PanelGenerator gen(inn, n);
        std::vector<AggregatePath> paths;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto eps = gen.generate(-tr.m, width, 100 + r);
            paths.push_back(aggregate(evaluate_panel(model, draw, coeffs, eps, 0, width, tr, 1e300)));
        }
        return std::pair{draw, paths};
    };

    SUBCASE("iid normalized sum has unit variance") {
        const LinearModel m{SequenceMap::finite(0, {1.0})};
        const auto [draw, paths] = run(m, point_mass(0.0), InnovationGeneratorSpec{});
        const auto c = empirical_cov(paths, 0);
        CHECK(c.value >= 0.0);
        CHECK(std::abs(c.value - 1.0) < 3.0 * c.stderr_);
        CHECK_THROWS_AS(empirical_cov(paths, width), IndexError);
    }
    SUBCASE("moving average autocorrelation") {
        const LinearModel m{SequenceMap::finite(0, {1.0, 1.0})};
        const auto [draw, paths] = run(m, point_mass(0.0), InnovationGeneratorSpec{});
        const auto c0 = empirical_cov(paths, 0), c1 = empirical_cov(paths, 1);
        CHECK(std::abs(c0.value - 2.0) < 3.0 * c0.stderr_);
        CHECK(std::abs(c1.value - 1.0) < 3.0 * c1.stderr_);
        CHECK(c1.value / c0.value == doctest::Approx(0.5).epsilon(0.1));
    }
    SUBCASE("exact and empirical agree at fixed environment") {
        DsvStarModel m;
        m.terms = {{{0}, AffineMap{1.0, {0.5}}}, {{1}, AffineMap{0.0, {0.8}}}, {{0, 2}, AffineMap{0.4, {}}}};
        InnovationGeneratorSpec inn;
        inn.kind = InnovationKind::LinearShift;
        inn.beta_lo = -1;
        inn.beta = {0.5, 1.0, 0.5};
        const auto [draw, paths] = run(m, uniform(0.0, 1.0), inn);
        const auto kernel = theoretical_chi(inn);
        for (long tau : {0L, 1L, 2L}) {
            const auto ex = gamma_n_exact(draw, m, kernel, tau, tr);
            const auto em = empirical_cov(paths, tau);
            CHECK(std::abs(em.value - ex.value) <= 3.0 * em.stderr_ + ex.truncation_bound);
        }
    }
}
