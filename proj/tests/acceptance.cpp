// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dsagg/aggregation.hpp"
#include "dsagg/chaos.hpp"
#include "dsagg/commands.hpp"
#include "dsagg/recursive.hpp"
#include "dsagg/rng.hpp"
#include "dsagg/series.hpp"
#include "dsagg/validation.hpp"

using namespace dsagg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs{DSAGG_CONFIG_DIR};
const fs::path kScratch = fs::temp_directory_path() / "dsagg_acceptance";

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const std::string& name, const json& j) {
    fs::create_directories(kScratch / "configs");
    const fs::path p = kScratch / "configs" / (name + ".json");
    std::ofstream(p) << j.dump(2);
    return p;
}

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code == kExitRuntime) std::cerr << err.str();
    return code;
}

std::vector<double> gaussian_series(std::size_t n, Rng& rng) {
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

// ---- 1: power series -------------------------------------------------------------------------

Outcome series_exactness() {
    Outcome o;
    constexpr std::size_t M = 256;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    Rng rng = make_rng(1, "acceptance.series");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        // random support length and l1 mass below one
        const std::size_t len = 1 + static_cast<std::size_t>(std::abs(u(rng)) * 40.0);
        std::vector<double> b(M + 1, 0.0);
        double l1 = 0.0;
        for (std::size_t k = 1; k <= len && k <= M; ++k) l1 += std::abs(b[k] = u(rng));
        const double target = 0.05 + 0.9 * std::abs(u(rng));
        for (double& v : b) v *= target / l1;
        const PowerSeries g = invert_power_series(PowerSeries(b), M);
        for (std::size_t k = 0; k <= M; ++k) {
            double r = g[k], scale = std::abs(g[k]);
            for (std::size_t j = 1; j <= k; ++j) {
                r -= b[j] * g[k - j];
                scale += std::abs(b[j] * g[k - j]);
            }
            if (k == 0) r -= 1.0;
            // a few roundings per accumulated term
            const double ratio = std::abs(r) / (4.0 * eps * std::max(scale, 1.0));
            worst = std::max(worst, ratio);
        }
    }
    const bool inv_ok = worst <= 1.0;

    double worst_garch = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const double lambda1 = 0.5 + std::abs(u(rng));
        const double kappa2 = 0.5 + 2.5 * std::abs(u(rng));
        const double beta = 0.9 * std::abs(u(rng));
        const double rho_max = 0.95;
        const double alpha = std::abs(u(rng)) * (rho_max - beta) / lambda1;
        const double rho = lambda1 * alpha + beta;
        const double kappa = std::sqrt(kappa2);
        const ArchCoefficients a = map_garch11(0.1, alpha, beta, M);
        std::vector<double> lb(M + 1, 0.0);
        for (std::size_t k = 1; k <= M; ++k) lb[k] = lambda1 * a.b[k];
        const PowerSeries g = invert_power_series(PowerSeries(lb), M);
        double h2 = 0.0;
        for (std::size_t l = 1; l <= M; ++l) h2 += kappa2 * g[l] * g[l];
        const double closed = lambda1 * lambda1 * kappa2 * alpha * alpha / (1.0 - rho * rho);
        const double tail = kappa * kappa * lambda1 * lambda1 * alpha * alpha * std::pow(rho, 2.0 * M) / (1.0 - rho * rho);
        const double err = std::abs(closed - h2) - tail;
        worst_garch = std::max(worst_garch, err / std::max(closed, 1e-300));
        const Garch11Model gm{AffineMap::constant(0.1), AffineMap::constant(alpha), AffineMap::constant(beta), lambda1,
                              lambda1 * lambda1 * (1.0 + kappa2)};
        const double form = bilinear_form(gm, std::vector<double>{0.0}, M).h_sq;
        worst_garch = std::max(worst_garch, (std::abs(closed - form) - tail) / std::max(closed, 1e-300));
    }
    // relative excess over the tail, allowing summation rounding
    const bool garch_ok = worst_garch <= 1e-13;
    o.pass = inv_ok && garch_ok;
    o.detail = fmt::format("inversion residual {:.3g} of the 4-eps budget over 100 series; GARCH excess over tail {:.3g} (50 points)",
                           worst, worst_garch);
    return o;
}

// ---- 2: recursion vs chaos -------------------------------------------------------------------

Outcome recursion_vs_chaos() {
    Outcome o;
    const std::vector<double> y{0.0};
    struct Case {
        std::string name;
        LarchModel model;
        Truncation tr;
    };
    Truncation t1;
    t1.k_max = 6;
    t1.m = 24;
    Truncation t2;
    t2.k_max = 5;
    t2.m = 20;
    const std::vector<Case> cases{
        {"b1-only", LarchModel{AffineMap::constant(1.0), SequenceMap::finite(1, {0.7})}, t1},
        {"geometric", LarchModel{AffineMap::constant(1.0), SequenceMap::geometric(1, AffineMap::constant(0.5), AffineMap::constant(0.5))}, t2}};
    constexpr long T = 1000;
    for (const auto& c : cases) {
        const ChaosCoefficients cc = volterra_coefficients(c.model, y, c.tr);
        const double tail = cc.tail.total();
        const long burn = default_burn_in(c.tr.m);
        double pooled = 0.0, worst_rep = 0.0;
        for (std::uint64_t rep = 0; rep < 100; ++rep) {
            Rng rng = make_rng(2, "acceptance.larch." + c.name, rep);
            const auto eps = gaussian_series(static_cast<std::size_t>(burn + T), rng);
            const TimeSeriesView view{eps, -burn};
            const auto rec = simulate_recursive(c.model, y, view, 0, T, std::nullopt, c.tr);
            const auto ch = evaluate_chaos(cc, view, 0, T);
            double s = 0.0;
            for (long t = 0; t < T; ++t) {
                const double d = rec[static_cast<std::size_t>(t)] - ch[static_cast<std::size_t>(t)];
                s += d * d;
            }
            s /= static_cast<double>(T);
            pooled += s / 100.0;
            worst_rep = std::max(worst_rep, s);
        }
        const bool ok = pooled <= 3.0 * tail;
        o.pass = o.pass && ok;
        o.detail += fmt::format("{}{}: mean sq gap {:.3g} vs 3x tail {:.3g} (max replicate {:.3g})",
                                o.detail.empty() ? "" : "; ", c.name, pooled, 3.0 * tail, worst_rep);
    }
    return o;
}

// ---- 3: orthogonality ------------------------------------------------------------------------

Outcome orthogonality() {
    Outcome o;
    DsvStarModel m;
    m.terms = {{{0}, AffineMap::constant(1.0)},       {{2}, AffineMap::constant(-0.6)},
               {{0, 1}, AffineMap::constant(0.8)},    {{1, 3}, AffineMap::constant(0.5)},
               {{0, 2, 3}, AffineMap::constant(0.7)}, {{1, 2, 4}, AffineMap::constant(-0.4)}};
    Truncation tr;
    tr.k_max = 3;
    const ChaosCoefficients cc = volterra_coefficients(m, std::vector<double>{0.0}, tr);
    constexpr std::size_t n = 100000;
    constexpr long stride = 5;  // lags reach 4: disjoint windows give independent samples
    Rng rng = make_rng(3, "acceptance.orthogonality");
    const auto eps = gaussian_series(n * stride, rng);
    const TimeSeriesView view{eps, 0};
    std::vector<std::vector<double>> part(3, std::vector<double>(n));
    for (int k = 1; k <= 3; ++k) {
        ChaosEvalOptions opt;
        opt.orders = {k};
        for (std::size_t r = 0; r < n; ++r) {
            const long t = static_cast<long>(r) * stride + stride - 1;
            part[static_cast<std::size_t>(k - 1)][r] = evaluate_chaos(cc, view, t, t + 1, opt)[0];
        }
    }
    auto mean_se = [](const std::vector<double>& v) {
        double s = 0.0, s2 = 0.0;
        for (double x : v) {
            s += x;
            s2 += x * x;
        }
        const double m = s / static_cast<double>(v.size());
        return std::pair{m, std::sqrt((s2 / static_cast<double>(v.size()) - m * m) / static_cast<double>(v.size()))};
    };
    double worst_cross = 0.0, worst_var = 0.0;
    for (int a = 0; a < 3; ++a) {
        std::vector<double> sq(n);
        for (std::size_t r = 0; r < n; ++r) sq[r] = part[a][r] * part[a][r];
        const auto [v, se] = mean_se(sq);
        worst_var = std::max(worst_var, std::abs(v - cc.order_mass(a + 1)) / se);
        for (int b = a + 1; b < 3; ++b) {
            std::vector<double> pr(n);
            for (std::size_t r = 0; r < n; ++r) pr[r] = part[a][r] * part[b][r];
            const auto [c, cse] = mean_se(pr);
            worst_cross = std::max(worst_cross, std::abs(c) / cse);
        }
    }
    o.pass = worst_cross < 3.0 && worst_var < 3.0;
    o.detail = fmt::format("max |cross cov|/SE {:.2f}, max |var - mass|/SE {:.2f} over 1e5 samples", worst_cross, worst_var);
    return o;
}

// ---- 4: gamma_n oracle -----------------------------------------------------------------------

struct Brute {
    double value = 0.0;
    double abs_sum = 0.0;
};

Brute brute_gamma_n(const std::vector<ChaosCoefficients>& units, const InteractionKernel& kernel, long tau) {
    Brute b;
    const std::size_t n = units.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double chi = kernel.at(static_cast<long>(i) - static_cast<long>(j));
            for (const auto& ord : units[i].orders) {
                for (std::size_t u = 0; u < ord.size(); ++u) {
                    std::vector<int> t(ord.tuple(u).begin(), ord.tuple(u).end());
                    for (int& l : t) l += static_cast<int>(tau);
                    const double v = ord.values[u] * units[j].find(t) * std::pow(chi, ord.k);
                    b.value += v;
                    b.abs_sum += std::abs(v);
                }
            }
        }
    }
    b.value /= static_cast<double>(n);
    b.abs_sum /= static_cast<double>(n);
    return b;
}

Outcome gamma_oracle() {
    Outcome o;
    Rng rng = make_rng(4, "acceptance.gamma");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> lag(0, 4);
    EnvironmentSpec env;
    env.family = MarginalFamily::UniformBox;
    env.coords = {CoordinateLaw{}, CoordinateLaw{}};
    env.coords[0].lo = -1.0;
    env.coords[0].hi = 1.0;
    env.coords[1].lo = 0.0;
    env.coords[1].hi = 2.0;
    double worst_rel = 0.0;
    bool bitwise = true;
    std::size_t banded_cases = 0;
    for (int cfg = 0; cfg < 20; ++cfg) {
        DsvStarModel m;
        const int terms = 3 + cfg % 4;
        for (int t = 0; t < terms; ++t) {
            const int k = 1 + t % 3;
            std::vector<int> lags;
            while (static_cast<int>(lags.size()) < k) {
                const int l = lag(rng);
                if (std::find(lags.begin(), lags.end(), l) == lags.end()) lags.push_back(l);
            }
            std::sort(lags.begin(), lags.end());
            m.terms.push_back({lags, AffineMap{u(rng), {u(rng), u(rng)}}});
        }
        KernelSpec ks;
        if (cfg % 2 == 0) {
            // table from a random shift so it is a valid covariance
            std::vector<double> beta(static_cast<std::size_t>(1 + cfg % 5));
            for (double& v : beta) v = u(rng);
            double n2 = 0.0;
            for (double v : beta) n2 += v * v;
            ks.table.assign(beta.size(), 0.0);
            for (std::size_t r = 0; r < beta.size(); ++r)
                for (std::size_t a = 0; a + r < beta.size(); ++a) ks.table[r] += beta[a] * beta[a + r] / n2;
            ks.table[0] = 1.0;
        } else {
            ks.kind = KernelSpec::Kind::Geometric;
            ks.rate = 0.9 * u(rng);
        }
        const InteractionKernel kernel = make_kernel(ks);
        const EnvironmentDraw draw = sample_environment(env, 200, derive_seed(4, "acceptance.gamma.env", static_cast<std::uint64_t>(cfg)));
        const auto units = unit_coefficients(m, draw, Truncation{});
        for (long tau : {0L, 1L, -2L}) {
            const Brute b = brute_gamma_n(units, kernel, tau);
            GammaNOptions dense;
            dense.banded = false;
            const GammaNResult fast = gamma_n_exact(draw, m, kernel, tau, Truncation{});
            const GammaNResult full = gamma_n_exact(draw, m, kernel, tau, Truncation{}, dense);
            // cancellation can leave |value| far below the summed magnitudes
            const double denom = std::max(std::abs(b.value), 1e-3 * b.abs_sum);
            if (denom > 0.0) worst_rel = std::max(worst_rel, std::abs(fast.value - b.value) / denom);
            else worst_rel = std::max(worst_rel, std::abs(fast.value));
            if (ks.kind == KernelSpec::Kind::Table) {
                ++banded_cases;
                bitwise = bitwise && fast.band >= 0 && fast.value == full.value;
            }
        }
    }
    o.pass = worst_rel <= 1e-12 && bitwise;
    o.detail = fmt::format("max relative error {:.3g} over 20 configurations x 3 lags at N = 200; banded == dense bitwise in {}/{} cases",
                           worst_rel, bitwise ? banded_cases : 0, banded_cases);
    return o;
}

// ---- 5: SLLN ---------------------------------------------------------------------------------

Outcome slln() {
    Outcome o;
    const fs::path out = kScratch / "slln";
    fs::remove_all(out);
    if (cli({"validate", "slln", "--config", (kConfigs / "slln_order1.json").string(), "--out", out.string()}) != kExitOk)
        return {false, "slln run failed"};
    const json r = read_json(out / "slln.json")["result"];
    const double shrink = r["shrink"][0].get<double>();
    double first = 0.0, last = 0.0;
    for (const auto& row : r["rows"]) {
        if (row["tau"] != 0) continue;
        if (row["n"] == 100) first = row["median_abs_diff"];
        if (row["n"] == 10000) last = row["median_abs_diff"];
    }
    const fs::path ctl = kScratch / "slln_control";
    fs::remove_all(ctl);
    if (cli({"validate", "slln", "--config", (kConfigs / "iid_trivial.json").string(), "--out", ctl.string()}) != kExitOk)
        return {false, "control run failed"};
    const bool exact = read_json(ctl / "slln.json")["result"]["exact"].get<bool>();
    o.pass = shrink >= 3.0 && exact;
    o.detail = fmt::format("median |Gamma^N(0) - Gamma(0)| {:.4g} (N=100) -> {:.4g} (N=10000), shrink {:.2f}x; iid point-mass control exact: {}",
                           first, last, shrink, exact ? "yes" : "no");
    return o;
}

// ---- 6: CLT ----------------------------------------------------------------------------------

Outcome clt() {
    Outcome o;
    const fs::path out = kScratch / "clt";
    fs::remove_all(out);
    if (cli({"validate", "clt", "--config", (kConfigs / "clt_linear.json").string(), "--out", out.string()}) != kExitOk)
        return {false, "clt run failed"};
    const json s = read_json(out / "clt.json")["result"]["summary"];
    std::map<std::size_t, std::pair<double, double>> by_n;
    for (const auto& row : s) by_n[row["n"].get<std::size_t>()] = {row["median_ks"].get<double>(), row["median_p"].get<double>()};
    const double ks64 = by_n[64].first, ks4096 = by_n[4096].first, p4096 = by_n[4096].second;

    // exactly Gaussian aggregates: 20 environment seeds x 5 time points
    CltConfig c;
    c.model = LinearModel{SequenceMap::finite(0, {1.0})};
    c.env.coords = {CoordinateLaw{}};
    c.n_grid = {64};
    c.replicates = 2000;
    c.env_seeds = 20;
    c.time_points = {0, 1, 2, 3, 4};
    c.seed = derive_seed(6, "acceptance.clt.control");
    const CltResult ctl = run_clt_experiment(c);
    std::size_t reject = 0;
    for (const auto& cell : ctl.cells) reject += cell.vs_limit.p_value < 0.05 ? 1 : 0;
    const double rate = static_cast<double>(reject) / static_cast<double>(ctl.cells.size());

    o.pass = ks4096 < ks64 && p4096 > 0.01 && std::abs(rate - 0.05) <= 0.05;
    o.detail = fmt::format("median KS {:.4f} (N=64) -> {:.4f} (N=4096), median p at 4096 {:.3f}; Gaussian control rejects {}/{} = {:.3f} at 0.05",
                           ks64, ks4096, p4096, reject, ctl.cells.size(), rate);
    return o;
}

// ---- 7: probes -------------------------------------------------------------------------------

Outcome probes() {
    Outcome o;
    json j = read_json(kConfigs / "probes_linear.json");
    j["validation"]["probes"]["trials"] = 1000;
    const fs::path cfg = write_config("probes_1000", j);
    const fs::path out = kScratch / "probes";
    fs::remove_all(out);
    if (cli({"validate", "probes", "--config", cfg.string(), "--out", out.string()}) != kExitOk)
        return {false, "probes run failed"};
    const json gaps = read_json(out / "probes.json")["result"]["gaps"];
    bool inside_ok = true, beyond_ok = true;
    std::string parts;
    for (const auto& g : gaps) {
        const double checks = g["checks"], passes = g["passes"], lc = g["lemma_checks"], lp = g["lemma_passes"];
        const bool beyond = g["beyond_window"];
        if (beyond) {
            beyond_ok = beyond_ok && passes >= 0.99 * checks && lp >= 0.99 * lc;
        } else {
            inside_ok = inside_ok && passes == checks && lp == lc;
        }
        parts += fmt::format("{}gap {} {}: probes {:.4f}, lemma {:.4f}, min margin {:.3g}", parts.empty() ? "" : "; ",
                             g["gap"].get<long>(), beyond ? "beyond" : "inside", passes / checks, lp / lc,
                             g["min_margin"].get<double>());
    }
    o.pass = inside_ok && beyond_ok;
    o.detail = parts + " (1000 trials)";
    return o;
}

// ---- 8: gatekeeping --------------------------------------------------------------------------

Outcome gatekeeping() {
    Outcome o;
    auto failed_ids = [](const std::string& name) {
        const fs::path out = kScratch / ("gate_" + name);
        fs::remove_all(out);
        const int code = cli({"check", "--config", (kConfigs / (name + ".json")).string(), "--out", out.string()});
        return std::pair{code, read_json(out / "check.json")["failed"]};
    };
    auto has = [](const json& a, const std::string& id) { return std::find(a.begin(), a.end(), id) != a.end(); };
    const auto [arch_code, arch_failed] = failed_ids("arch1_fail");
    const auto [common_code, common_failed] = failed_ids("common_innovation");
    const bool arch = arch_code == kExitHypothesis && has(arch_failed, "arch1.sqrt_lambda2_alpha_lt_1");
    const bool common = common_code == kExitHypothesis && has(common_failed, "chi.summable");
    const bool w4 = clt_exponent_window(1.0, 4.0, WeakDepFamily::Lambda).empty;
    const bool w6 = !clt_exponent_window(1.0, 6.0, WeakDepFamily::Lambda).empty;
    o.pass = arch && common && w4 && w6;
    o.detail = fmt::format("ARCH(1) sqrt(l2) a > 1 refused: {}; chi = 1 refused: {}; window empty at lambda 4: {}, nonempty at 6: {}",
                           arch, common, w4, w6);
    return o;
}

// ---- 9: determinism --------------------------------------------------------------------------

Outcome determinism() {
    Outcome o;
    json clt = read_json(kConfigs / "clt_linear.json");
    clt["aggregation"]["n_grid"] = {16, 64};
    clt["validation"]["replicates"] = 300;
    clt["validation"]["env_seeds"] = 2;
    json slln = read_json(kConfigs / "slln_order1.json");
    slln["aggregation"]["n_grid"] = {100, 1000};
    slln["validation"]["env_seeds"] = 4;
    json probes = read_json(kConfigs / "probes_linear.json");
    probes["validation"]["probes"]["trials"] = 20;
    json sim = read_json(kConfigs / "clt_linear.json");
    sim["aggregation"]["n_grid"] = {300};
    const std::vector<std::pair<std::vector<std::string>, fs::path>> runs{
        {{"check"}, write_config("det_check", clt)},
        {{"simulate"}, write_config("det_sim", sim)},
        {{"estimate-chi"}, write_config("det_chi", sim)},
        {{"validate", "clt"}, write_config("det_clt", clt)},
        {{"validate", "slln"}, write_config("det_slln", slln)},
        {{"validate", "probes"}, write_config("det_probes", probes)}};
    std::size_t files = 0, mismatches = 0;
    for (const auto& [cmd, cfg] : runs) {
        const fs::path out = kScratch / "det_out";
        std::map<std::string, std::uint64_t> hashes[2];
        for (int pass = 0; pass < 2; ++pass) {
            fs::remove_all(out);
            std::vector<std::string> args = cmd;
            args.insert(args.end(), {"--config", cfg.string(), "--out", out.string(), "--threads", pass == 0 ? "1" : "8"});
            if (cli(args) != kExitOk) return {false, "run failed: " + cmd.back()};
            for (const auto& e : fs::recursive_directory_iterator(out))
                if (e.is_regular_file()) hashes[pass][fs::relative(e.path(), out).string()] = label_hash(slurp(e.path()));
        }
        files += hashes[0].size();
        if (hashes[0] != hashes[1]) ++mismatches;
    }
    o.pass = mismatches == 0;
    o.detail = fmt::format("{} output files from 6 subcommand runs hash-identical under 1 and 8 threads ({} runs differ)", files,
                           mismatches);
    return o;
}

}  // namespace

int main() {
    fs::create_directories(kScratch);
    struct Criterion {
        std::string name;
        std::function<Outcome()> run;
        double budget_s;  // wall-clock limit, infinite when none is stated
    };
    const double none = std::numeric_limits<double>::infinity();
    const std::vector<Criterion> criteria{
        {"series inversion and GARCH closed forms", series_exactness, 10.0},
        {"recursion vs chaos expansion", recursion_vs_chaos, 60.0},
        {"chaos orthogonality", orthogonality, 60.0},
        {"exact covariance vs brute force", gamma_oracle, 30.0},
        {"strong law for Gamma^N", slln, 300.0},
        {"central limit for the aggregate", clt, 600.0},
        {"weak-dependence probes", probes, 300.0},
        {"hypothesis gatekeeping", gatekeeping, 10.0},
        {"determinism across thread budgets", determinism, none}};
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = criteria[k].run();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > criteria[k].budget_s) {
            r.pass = false;
            r.detail += fmt::format("; over the {:.0f} s budget", criteria[k].budget_s);
        }
        failures += r.pass ? 0 : 1;
        std::cout << fmt::format("criterion {}: {} {} ({}) [{:.1f} s]\n", k + 1, r.pass ? "PASS" : "FAIL",
                                 criteria[k].name, r.detail, secs)
                  << std::flush;
    }
    return failures == 0 ? 0 : 1;
}
