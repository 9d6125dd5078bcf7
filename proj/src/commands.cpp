#include "dsagg/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dsagg/errors.hpp"
#include "dsagg/io.hpp"
#include "dsagg/parallel.hpp"
#include "dsagg/rng.hpp"
#include "dsagg/validation.hpp"

namespace dsagg {

using nlohmann::json;
namespace fs = std::filesystem;

double profile_decay_exponent(const DependenceProfile& profile) {
    // an eventually-zero profile decays faster than any power
    constexpr double kFast = 1e6;
    if (profile.bound.size() < 5) return kFast;
    if (profile.bound.back() == 0.0) return kFast;
    const double r = static_cast<double>(profile.bound.size() - 1);
    const std::size_t lo = std::max<std::size_t>(1, profile.bound.size() / 4);
    const double b_lo = profile.bound[lo], b_hi = profile.bound.back();
    if (!(b_lo > 0.0) || !(b_hi > 0.0)) return kFast;
    const double slope = (std::log(b_hi) - std::log(b_lo)) / (std::log(r) - std::log(static_cast<double>(lo)));
    return std::min(kFast, std::max(0.0, -slope));
}

CheckOutcome run_checks(const ExperimentConfig& c, CheckScope scope) {
    CheckOutcome out;
    json& rep = out.report;
    const auto& v = c.validation;
    auto failed = [&](const std::string& id) { out.failed.push_back(id); };

    CheckOptions opt;
    opt.mc_samples = v.check_samples;
    opt.truncation = c.truncation;
    const ExistenceReport ex = check_existence(c.model, c.environment, derive_seed(c.seed, "check.existence", 0), opt);
    rep["existence"] = to_json(ex);
    for (const auto& cond : ex.conditions)
        if (cond.verdict == Verdict::Fail) failed(cond.condition_id);
    const bool exists = ex.overall() != Verdict::Fail;

    const InteractionKernel kernel = theoretical_chi(c.innovations, v.chi_r_max);
    rep["chi"] = {{"summable", kernel.summable}, {"note", kernel.note}, {"chi", kernel.chi}};
    if (!kernel.summable && scope != CheckScope::Probes) failed("chi.summable");

    const double ebound = c.innovations.bound();
    if (scope != CheckScope::Slln) {
        try {
            const ScalarEstimate k5 = check_k5(c.model, c.environment, v.check_samples,
                                               derive_seed(c.seed, "check.k5", 0), c.truncation, ebound);
            rep["k5"] = {{"ev", k5.value}, {"stderr", k5.stderr_}};
            if (!std::isfinite(k5.value)) failed("k5.finite_ev");
        } catch (const Error& e) {
            rep["k5"] = {{"error", e.what()}};
            failed("k5.finite_ev");
        }
        if (exists) {
            try {
                const MomentReport m = check_moment_k2delta(c.model, c.environment, c.innovations, v.delta, v.check_samples,
                                                            derive_seed(c.seed, "check.k2delta", 0), c.truncation);
                rep["k2delta"] = to_json(m);
                if (!std::isfinite(m.estimate)) failed("k2delta.finite_moment");
            } catch (const Error& e) {
                rep["k2delta"] = {{"error", e.what()}};
                failed("k2delta.finite_moment");
            }
        }
    }

    if (scope == CheckScope::All || scope == CheckScope::Clt) {
        const DependenceProfile profile = dependence_profile(c.innovations, 64);
        json w{{"family", to_string(profile.family)}, {"provenance", profile.provenance}};
        if (profile.empirical_only && !v.decay_exponent) {
            w["verdict"] = "inconclusive";
            w["note"] = "profile is empirical only; set validation.decay_exponent";
        } else {
            const double decay = v.decay_exponent ? *v.decay_exponent : profile_decay_exponent(profile);
            if (!(decay > 0.0)) {
                w["verdict"] = "fail";
                w["note"] = "dependence profile does not decay";
                failed("clt.exponent_window");
                rep["exponent_window"] = w;
                rep["failed"] = out.failed;
                rep["verdict"] = "fail";
                return out;
            }
            const ExponentWindow win = clt_exponent_window(v.delta, decay, profile.family);
            w["window"] = to_json(win);
            w["verdict"] = win.empty ? "fail" : "pass";
            if (win.empty) failed("clt.exponent_window");
            if (v.alpha > 0.0 || v.beta > 0.0) {
                const bool inside = in_exponent_window(win, v.alpha, v.beta);
                w["configured_inside"] = inside;
                if (!inside) failed("clt.configured_exponents");
            }
        }
        if (kernel.summable && !profile.empirical_only) {
            const ChiDecayReport d = check_chi_decay(profile, kernel, v.delta);
            w["chi_decay"] = {{"exponent", d.exponent}, {"constant", d.constant}, {"violations", d.violations}};
            if (!d.ok()) failed("chi.decay");
        }
        rep["exponent_window"] = w;
    }
    rep["failed"] = out.failed;
    rep["verdict"] = out.failed.empty() ? "pass" : "fail";
    return out;
}

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
    std::optional<std::string> format;
    bool force = false;
    std::string which;
};

struct Context {
    ExperimentConfig cfg;
    fs::path dir;
    bool csv = true;
    bool json_out = true;
    std::ostream& log;
};

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", o.seed, "master seed override");
    sub->add_option("--threads", o.threads, "thread budget (default: DSAGG_THREADS or all cores)");
    sub->add_option("--out", o.out, "output directory override");
    sub->add_option("--format", o.format, "restrict report output to one format")->check(CLI::IsMember({"csv", "json"}));
}

void write_json(const Context& ctx, const std::string& name, const json& j) {
    if (ctx.json_out) write_text_file(ctx.dir / name, j.dump(2) + "\n");
}

void write_csv(const Context& ctx, const std::string& name, const std::string& text) {
    if (ctx.csv) write_text_file(ctx.dir / name, text);
}

/// N,metric,value,err rows for plotting.
struct FlatCsv {
    std::string text = "n,metric,value,err\n";
    void row(std::size_t n, const std::string& metric, double value, double err) {
        text += fmt::format("{},{},{},{}\n", n, metric, format_double(value), format_double(err));
    }
};

int cmd_check(Context& ctx) {
    const CheckOutcome oc = run_checks(ctx.cfg, CheckScope::All);
    write_json(ctx, "check.json", oc.report);
    if (ctx.csv) {
        std::string text = "condition_id,verdict,estimate,stderr,violation_fraction\n";
        for (const auto& cond : oc.report["existence"]["conditions"])
            text += fmt::format("{},{},{},{},{}\n", cond["condition_id"].get<std::string>(),
                                cond["verdict"].get<std::string>(), format_double(cond["estimate"].get<double>()),
                                format_double(cond["stderr"].get<double>()),
                                format_double(cond["violation_fraction"].get<double>()));
        write_csv(ctx, "check.csv", text);
    }
    for (const auto& id : oc.failed) ctx.log << "check failed: " << id << '\n';
    ctx.log << "check verdict: " << (oc.failed.empty() ? "pass" : "fail") << '\n';
    return oc.failed.empty() ? kExitOk : kExitHypothesis;
}

int cmd_simulate(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::size_t n = c.aggregation.n_grid.back();
    const long T = static_cast<long>(c.validation.length);
    const EnvironmentDraw draw = sample_environment(c.environment, n, derive_seed(c.seed, "simulate.env", 0));
    const bool dsulbs = tag_of(c.model) == ModelTag::DSULBS;
    std::vector<ChaosCoefficients> coeffs;
    int lag_lo = 0, lag_hi = 0;
    if (dsulbs) {
        const auto& seq = std::get<DsulbsModel>(c.model).c;
        lag_lo = std::min(0, seq.support_lo(c.truncation.m));
        lag_hi = std::max(0, seq.support_hi(c.truncation.m));
    } else {
        coeffs = unit_coefficients(c.model, draw, c.truncation);
        for (const auto& u : coeffs) {
            lag_lo = std::min(lag_lo, u.lag_lo);
            lag_hi = std::max(lag_hi, u.lag_hi);
        }
    }
    const InnovationPanel eps =
        generate_panel(c.innovations, n, -lag_hi, T - lag_lo, derive_seed(c.seed, "simulate.eps", 0));
    const ElementaryPanel panel =
        evaluate_panel(c.model, draw, coeffs, eps, 0, T, c.truncation, c.innovations.bound());
    const AggregatePath path = aggregate(panel, c.aggregation.rule, c.aggregation.custom_constant);

    {
        std::string text = "i";
        for (std::size_t d = 0; d < draw.s; ++d) text += fmt::format(",y{}", d);
        text += '\n';
        for (std::size_t i = 0; i < draw.n; ++i) {
            text += std::to_string(i);
            for (double y : draw.at(i)) text += "," + format_double(y);
            text += '\n';
        }
        write_text_file(ctx.dir / "environment.csv", text);
    }
    if (c.output.write_panels) {
        const PanelFormat pf = c.output.panel_format == "binary" ? PanelFormat::Binary : PanelFormat::Csv;
        const std::string ext = pf == PanelFormat::Binary ? ".bin" : ".csv";
        const json meta{{"seed", c.seed}, {"innovations", resolved_config(c)["innovations"]}};
        save_panel(ctx.dir / ("innovations" + ext), to_matrix(eps), pf, meta);
        save_panel(ctx.dir / ("elementary" + ext), to_matrix(panel), pf,
                   {{"seed", c.seed}, {"model", resolved_config(c)["model"]}, {"method", panel.method}});
    }
    {
        std::ostringstream s;
        write_path_csv(s, path);
        write_text_file(ctx.dir / "aggregate.csv", s.str());
    }

    std::vector<CovarianceTable> tables;
    CovarianceTable emp{CovarianceKind::Empirical, {}};
    for (long tau : c.aggregation.taus) {
        if (std::labs(tau) >= T) continue;
        try {
            const EmpiricalCov e = empirical_cov(std::span<const AggregatePath>(&path, 1), tau);
            emp.rows.push_back({tau, e.value, e.stderr_});
        } catch (const ContractError& e) {
            ctx.log << "empirical covariance skipped: " << e.what() << '\n';
            break;
        }
    }
    tables.push_back(emp);
    json summary{{"n", n}, {"length", T}, {"b_n", path.b_n}, {"method", panel.method}};
    if (!dsulbs && c.aggregation.rule == NormalizationRule::Sqrt) {
        const InteractionKernel kernel = theoretical_chi(c.innovations, c.validation.chi_r_max);
        const CoefficientBank bank(coeffs);
        GammaNOptions gopt;
        gopt.band_tolerance = c.validation.band_tolerance;
        CovarianceTable exact{CovarianceKind::Exact, {}};
        for (long tau : c.aggregation.taus) {
            const GammaNResult g = gamma_n_exact(bank, n, kernel, tau, gopt);
            exact.rows.push_back({tau, g.value, g.truncation_bound});
        }
        tables.push_back(exact);
        if (kernel.summable) {
            CovarianceTable lim{CovarianceKind::Limit, {}};
            for (long tau : c.aggregation.taus) {
                const GammaLimit g = gamma_limit(c.model, c.environment, kernel, tau, c.truncation,
                                                 c.validation.mc_samples, derive_seed(c.seed, "simulate.limit", 0));
                lim.rows.push_back({tau, g.value, g.truncation_bound + 3.0 * g.stderr_});
            }
            tables.push_back(lim);
        } else {
            summary["limit"] = kernel.note;
        }
    }
    std::string cov = "tau,value,err_or_bound,kind\n";
    for (const auto& t : tables) {
        std::ostringstream s;
        write_covariance_csv(s, t);
        const std::string body = s.str();
        cov += body.substr(body.find('\n') + 1);
    }
    write_csv(ctx, "covariance.csv", cov);
    write_json(ctx, "simulate.json", summary);
    ctx.log << fmt::format("simulated N={} T={} ({})\n", n, T, panel.method);
    return kExitOk;
}

int cmd_estimate_chi(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::size_t n = c.aggregation.n_grid.back();
    const long r_max = c.validation.chi_r_max;
    if (static_cast<long>(n) <= r_max) throw ConfigError("/validation/chi_r_max: must be below the largest N");
    const InnovationPanel eps = generate_panel(c.innovations, n, 0, static_cast<long>(c.validation.length),
                                               derive_seed(c.seed, "estimate_chi.eps", 0));
    const auto est = estimate_chi(std::span<const InnovationPanel>(&eps, 1), r_max);
    std::ostringstream s;
    write_chi_csv(s, est);
    write_text_file(ctx.dir / "chi.csv", s.str());
    const InteractionKernel kernel = theoretical_chi(c.innovations, static_cast<int>(r_max));
    const DependenceProfile profile = dependence_profile(c.innovations, static_cast<int>(r_max));
    if (ctx.csv) {
        std::ostringstream p;
        write_profile_csv(p, profile);
        write_text_file(ctx.dir / "profile.csv", p.str());
    }
    json j{{"n", n}, {"length", c.validation.length}, {"theoretical", kernel.chi}, {"summable", kernel.summable}};
    j["estimate"] = json::array();
    std::size_t outside = 0;
    for (const auto& e : est) {
        const double theory = kernel.at(e.r);
        const bool ok = std::abs(e.value - theory) <= 3.0 * e.stderr_ + 1e-12;
        if (!ok) ++outside;
        j["estimate"].push_back({{"r", e.r}, {"value", e.value}, {"stderr", e.stderr_}, {"theory", theory}, {"within_3se", ok}});
    }
    j["outside_3se"] = outside;
    j["profile"] = {{"family", to_string(profile.family)}, {"provenance", profile.provenance}, {"bound", profile.bound}};
    write_json(ctx, "chi.json", j);
    ctx.log << fmt::format("estimated chi up to r={} ({} lags outside 3 SE)\n", r_max, outside);
    return kExitOk;
}

int cmd_validate(Context& ctx, const std::string& which, bool force) {
    const auto& c = ctx.cfg;
    const CheckScope scope = which == "clt" ? CheckScope::Clt : which == "slln" ? CheckScope::Slln : CheckScope::Probes;
    const CheckOutcome oc = run_checks(c, scope);
    if (!oc.failed.empty() && !force) {
        write_json(ctx, which + "_refused.json", oc.report);
        for (const auto& id : oc.failed) ctx.log << "hypothesis failed: " << id << '\n';
        ctx.log << "refusing to run " << which << " (use --force to override)\n";
        return kExitHypothesis;
    }
    json j;
    j["experiment"] = which;
    j["checks"] = oc.report;
    if (!oc.failed.empty()) j["annotation"] = "hypotheses unverified";
    FlatCsv csv;
    if (which == "clt") {
        CltConfig k;
        k.model = c.model;
        k.env = c.environment;
        k.innovations = c.innovations;
        k.truncation = c.truncation;
        k.n_grid = c.aggregation.n_grid;
        k.replicates = c.validation.replicates;
        k.time_points = c.validation.time_points;
        k.combination = c.validation.combination;
        k.env_seeds = c.validation.env_seeds;
        k.limit_mc_samples = c.validation.mc_samples;
        k.seed = derive_seed(c.seed, "validate.clt", 0);
        const CltResult r = run_clt_experiment(k);
        j["result"] = to_json(r);
        const auto& last_p = r.median_p.back().second;
        j["verdict"] = {{"trend_ok", r.trend_ok}, {"final_p_above_level", last_p > c.validation.level}};
        for (std::size_t q = 0; q < r.median_ks.size(); ++q) {
            csv.row(r.median_ks[q].first, "median_ks_limit", r.median_ks[q].second, 0.0);
            csv.row(r.median_p[q].first, "median_p_limit", r.median_p[q].second, 0.0);
            csv.row(r.median_ks_exact[q].first, "median_ks_exact", r.median_ks_exact[q].second, 0.0);
        }
        ctx.log << fmt::format("clt: trend {} final median p {}\n", r.trend_ok ? "ok" : "violated", last_p);
    } else if (which == "slln") {
        SllnConfig k;
        k.model = c.model;
        k.env = c.environment;
        k.kernel = theoretical_chi(c.innovations, c.validation.chi_r_max).spec;
        k.truncation = c.truncation;
        k.n_grid = c.aggregation.n_grid;
        k.taus = c.aggregation.taus;
        k.env_seeds = c.validation.env_seeds;
        k.limit_mc_samples = c.validation.mc_samples;
        k.band_tolerance = c.validation.band_tolerance;
        k.seed = derive_seed(c.seed, "validate.slln", 0);
        const SllnResult r = run_slln_experiment(k);
        j["result"] = to_json(r);
        for (const auto& row : r.rows)
            csv.row(row.n, fmt::format("median_abs_diff_tau{}", row.tau), row.median_abs_diff, 0.0);
        ctx.log << fmt::format("slln: exact {} monotone {}\n", r.exact, r.monotone);
    } else {
        ProbeConfig k;
        k.model = c.model;
        k.env = c.environment;
        k.innovations = c.innovations;
        k.truncation = c.truncation;
        k.units = c.validation.probes.units;
        k.replicates = c.validation.probes.replicates;
        k.trials = c.validation.probes.trials;
        k.gaps = c.validation.probes.gaps;
        k.block = c.validation.probes.block;
        k.delta = c.validation.delta;
        k.moment_samples = c.validation.check_samples;
        k.seed = derive_seed(c.seed, "validate.probes", 0);
        const ProbeResult r = run_probe_experiment(k);
        json gaps = json::array();
        for (const auto& g : r.gaps) {
            gaps.push_back({{"gap", g.gap},
                            {"epsilon", g.epsilon},
                            {"beyond_window", g.beyond_window},
                            {"checks", g.checks},
                            {"passes", g.passes},
                            {"min_margin", g.min_margin},
                            {"lemma_checks", g.lemma_checks},
                            {"lemma_passes", g.lemma_passes},
                            {"lemma_min_margin", g.lemma_min_margin},
                            {"first_trial", to_json(g.first_trial)},
                            {"first_lemma", to_json(g.first_lemma)}});
            const double rate = g.checks ? static_cast<double>(g.passes) / static_cast<double>(g.checks) : 1.0;
            csv.row(static_cast<std::size_t>(g.gap), "probe_pass_rate", rate, 0.0);
            csv.row(static_cast<std::size_t>(g.gap), "lemma_pass_rate",
                    g.lemma_checks ? static_cast<double>(g.lemma_passes) / static_cast<double>(g.lemma_checks) : 1.0, 0.0);
        }
        j["result"] = {{"profile", {{"family", to_string(r.profile.family)}, {"bound", r.profile.bound}}},
                       {"moment_2delta", r.moment_2delta},
                       {"ev", r.ev},
                       {"gaps", gaps}};
        ctx.log << fmt::format("probes: {} gaps x {} trials\n", r.gaps.size(), k.trials);
    }
    write_json(ctx, which + ".json", j);
    write_csv(ctx, which + ".csv", csv.text);
    return kExitOk;
}

unsigned default_threads() {
    if (const char* env = std::getenv("DSAGG_THREADS")) {
        try {
            return static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
            throw ConfigError(std::string("DSAGG_THREADS: not a number: ") + env);
        }
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Doubly stochastic panel aggregation experiments"};
    app.require_subcommand(1);
    Options o;
    auto* check = app.add_subcommand("check", "existence, moment, summability and exponent-window checks");
    auto* simulate = app.add_subcommand("simulate", "simulate panels and the aggregate");
    auto* validate = app.add_subcommand("validate", "run the clt, slln or probes experiment");
    auto* chi = app.add_subcommand("estimate-chi", "estimate the cross-sectional covariance");
    for (auto* sub : {check, simulate, validate, chi}) add_common(sub, o);
    validate->add_option("which", o.which, "experiment")->required()->check(CLI::IsMember({"clt", "slln", "probes"}));
    validate->add_flag("--force", o.force, "run even when hypotheses fail");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitRuntime;
    }

    try {
        Context ctx{load_config(o.config), {}, true, true, err};
        if (o.seed) ctx.cfg.seed = *o.seed;
        if (o.out) ctx.cfg.output.dir = *o.out;
        if (o.format) ctx.cfg.output.formats = {*o.format};
        unsigned threads = default_threads();
        if (ctx.cfg.threads) threads = ctx.cfg.threads;
        if (o.threads) threads = *o.threads;
        set_thread_budget(threads);
        ctx.dir = ctx.cfg.output.dir;
        ctx.csv = std::find(ctx.cfg.output.formats.begin(), ctx.cfg.output.formats.end(), "csv") != ctx.cfg.output.formats.end();
        ctx.json_out = std::find(ctx.cfg.output.formats.begin(), ctx.cfg.output.formats.end(), "json") != ctx.cfg.output.formats.end();
        write_text_file(ctx.dir / "resolved_config.json", resolved_config(ctx.cfg).dump(2) + "\n");
        if (check->parsed()) return cmd_check(ctx);
        if (simulate->parsed()) return cmd_simulate(ctx);
        if (chi->parsed()) return cmd_estimate_chi(ctx);
        return cmd_validate(ctx, o.which, o.force);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace dsagg
