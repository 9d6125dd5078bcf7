#include "dsagg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "dsagg/errors.hpp"

namespace dsagg {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError((path.empty() ? "/" : path) + ": " + what);
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

long as_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<long>();
}

std::size_t as_count(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long>() >= 0))
        fail(path, "expected a nonnegative integer");
    return j.get<std::size_t>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
}

template <class T, class F>
std::vector<T> as_array(const json& j, const std::string& path, F item) {
    if (!j.is_array()) fail(path, "expected an array");
    std::vector<T> out;
    for (std::size_t q = 0; q < j.size(); ++q) out.push_back(item(j[q], path + "/" + std::to_string(q)));
    return out;
}

/// Name lookup that reports the offending key path.
template <class F>
auto as_enum(const json& j, const std::string& path, F parse) {
    const std::string name = as_string(j, path);
    try {
        return parse(name);
    } catch (const Error& e) {
        fail(path, e.what());
    }
}

/// Object reader that rejects keys nobody asked for.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) fail(path_, "expected an object");
    }

    const json* get(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }
    const json& need(const std::string& key) {
        const json* v = get(key);
        if (!v) fail(at(key), "missing required key");
        return *v;
    }
    std::string at(const std::string& key) const { return path_ + "/" + key; }

    void number(const std::string& key, double& out) {
        if (const json* v = get(key)) out = as_number(*v, at(key));
    }
    void integer(const std::string& key, int& out) {
        if (const json* v = get(key)) out = static_cast<int>(as_integer(*v, at(key)));
    }
    void count(const std::string& key, std::size_t& out) {
        if (const json* v = get(key)) out = as_count(*v, at(key));
    }
    void flag(const std::string& key, bool& out) {
        if (const json* v = get(key)) out = as_bool(*v, at(key));
    }
    void text(const std::string& key, std::string& out) {
        if (const json* v = get(key)) out = as_string(*v, at(key));
    }
    void numbers(const std::string& key, std::vector<double>& out) {
        if (const json* v = get(key)) out = as_array<double>(*v, at(key), as_number);
    }
    void integers(const std::string& key, std::vector<long>& out) {
        if (const json* v = get(key)) out = as_array<long>(*v, at(key), as_integer);
    }
    void counts(const std::string& key, std::vector<std::size_t>& out) {
        if (const json* v = get(key)) out = as_array<std::size_t>(*v, at(key), as_count);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) fail(at(k), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

AffineMap parse_affine(const json& j, const std::string& path) {
    if (j.is_number()) return AffineMap::constant(j.get<double>());
    Obj o(j, path);
    AffineMap a;
    o.number("base", a.base);
    o.numbers("slope", a.slope);
    o.finish();
    return a;
}

json affine_json(const AffineMap& a) {
    if (a.slope.empty()) return a.base;
    return {{"base", a.base}, {"slope", a.slope}};
}

SequenceMap parse_sequence(const json& j, const std::string& path) {
    Obj o(j, path);
    SequenceMap s;
    const std::string kind = as_string(o.need("kind"), o.at("kind"));
    o.integer("lag_min", s.lag_min);
    if (const json* v = o.get("amp")) s.amp = parse_affine(*v, o.at("amp"));
    if (kind == "finite") {
        s.kind = SequenceMap::Kind::Finite;
        o.numbers("values", s.values);
    } else if (kind == "geometric" || kind == "two_sided_geometric") {
        s.kind = kind == "geometric" ? SequenceMap::Kind::Geometric : SequenceMap::Kind::TwoSidedGeometric;
        s.rate = parse_affine(o.need("rate"), o.at("rate"));
        if (s.kind == SequenceMap::Kind::TwoSidedGeometric) s.lag_min = 0;
    } else {
        fail(o.at("kind"), "unknown sequence kind '" + kind + "' (finite, geometric, two_sided_geometric)");
    }
    o.finish();
    return s;
}

json sequence_json(const SequenceMap& s) {
    switch (s.kind) {
        case SequenceMap::Kind::Finite:
            return {{"kind", "finite"}, {"lag_min", s.lag_min}, {"values", s.values}, {"amp", affine_json(s.amp)}};
        case SequenceMap::Kind::Geometric:
            return {{"kind", "geometric"},
                    {"lag_min", s.lag_min},
                    {"amp", affine_json(s.amp)},
                    {"rate", affine_json(s.rate)}};
        case SequenceMap::Kind::TwoSidedGeometric:
            return {{"kind", "two_sided_geometric"}, {"amp", affine_json(s.amp)}, {"rate", affine_json(s.rate)}};
    }
    return {};
}

CoefficientModel parse_model(Obj& o) {
    const ModelTag tag = as_enum(o.need("tag"), o.at("tag"), model_tag_from_string);
    auto affine = [&](const char* key) { return parse_affine(o.need(key), o.at(key)); };
    auto sequence = [&](const char* key) { return parse_sequence(o.need(key), o.at(key)); };
    auto optional_sequence = [&](const char* key) {
        const json* v = o.get(key);
        return v ? parse_sequence(*v, o.at(key)) : SequenceMap::zero();
    };
    switch (tag) {
        case ModelTag::Linear:
            return LinearModel{sequence("c")};
        case ModelTag::DSVStar: {
            DsvStarModel m;
            if (const json* v = o.get("constant")) m.constant = parse_affine(*v, o.at("constant"));
            const json& terms = o.need("terms");
            if (!terms.is_array()) fail(o.at("terms"), "expected an array");
            for (std::size_t q = 0; q < terms.size(); ++q) {
                const std::string p = o.at("terms") + "/" + std::to_string(q);
                Obj t(terms[q], p);
                ChaosTerm term;
                term.lags = as_array<int>(t.need("lags"), t.at("lags"),
                                          [](const json& x, const std::string& px) { return static_cast<int>(as_integer(x, px)); });
                term.value = parse_affine(t.need("value"), t.at("value"));
                t.finish();
                m.terms.push_back(std::move(term));
            }
            return m;
        }
        case ModelTag::DSULBS: {
            DsulbsModel m;
            if (const json* v = o.get("shift")) {
                const std::string s = as_string(*v, o.at("shift"));
                if (s == "clipped_linear") m.shift = DsulbsShift::ClippedLinear;
                else if (s == "product") m.shift = DsulbsShift::Product;
                else fail(o.at("shift"), "unknown shift '" + s + "' (clipped_linear, product)");
            }
            m.c = sequence("c");
            o.number("clip", m.clip);
            if (!(m.clip > 0.0)) fail(o.at("clip"), "clip must be positive");
            return m;
        }
        case ModelTag::Bilinear:
            return BilinearModel{affine("b0"), optional_sequence("a"), sequence("b")};
        case ModelTag::LarchInf:
            return LarchModel{affine("b0"), sequence("b")};
        case ModelTag::ArchInf: {
            ArchModel m{affine("b0"), sequence("b")};
            o.number("lambda1", m.lambda1);
            o.number("lambda2", m.lambda2);
            return m;
        }
        case ModelTag::Garch11: {
            Garch11Model m{affine("alpha0"), affine("alpha"), affine("beta")};
            o.number("lambda1", m.lambda1);
            o.number("lambda2", m.lambda2);
            return m;
        }
        case ModelTag::Arch1: {
            Arch1Model m{affine("alpha0"), affine("alpha")};
            o.number("lambda1", m.lambda1);
            o.number("lambda2", m.lambda2);
            return m;
        }
    }
    fail(o.at("tag"), "unsupported model");
}

json model_json(const CoefficientModel& model, const Truncation& tr) {
    json j = std::visit(
        [](const auto& m) -> json {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LinearModel>) {
                return {{"c", sequence_json(m.c)}};
            } else if constexpr (std::is_same_v<M, DsvStarModel>) {
                json terms = json::array();
                for (const auto& t : m.terms) terms.push_back({{"lags", t.lags}, {"value", affine_json(t.value)}});
                return {{"constant", affine_json(m.constant)}, {"terms", terms}};
            } else if constexpr (std::is_same_v<M, DsulbsModel>) {
                json o{{"shift", m.shift == DsulbsShift::Product ? "product" : "clipped_linear"}, {"c", sequence_json(m.c)}};
                if (std::isfinite(m.clip)) o["clip"] = m.clip;
                return o;
            } else if constexpr (std::is_same_v<M, BilinearModel>) {
                return {{"b0", affine_json(m.b0)}, {"a", sequence_json(m.a)}, {"b", sequence_json(m.b)}};
            } else if constexpr (std::is_same_v<M, LarchModel>) {
                return {{"b0", affine_json(m.b0)}, {"b", sequence_json(m.b)}};
            } else if constexpr (std::is_same_v<M, ArchModel>) {
                return {{"b0", affine_json(m.b0)}, {"b", sequence_json(m.b)}, {"lambda1", m.lambda1}, {"lambda2", m.lambda2}};
            } else if constexpr (std::is_same_v<M, Garch11Model>) {
                return {{"alpha0", affine_json(m.alpha0)},
                        {"alpha", affine_json(m.alpha)},
                        {"beta", affine_json(m.beta)},
                        {"lambda1", m.lambda1},
                        {"lambda2", m.lambda2}};
            } else {
                return {{"alpha0", affine_json(m.alpha0)},
                        {"alpha", affine_json(m.alpha)},
                        {"lambda1", m.lambda1},
                        {"lambda2", m.lambda2}};
            }
        },
        model);
    j["tag"] = to_string(tag_of(model));
    j["k_max"] = tr.k_max;
    j["m"] = tr.m;
    j["prune_tol"] = tr.prune_tol;
    j["max_terms"] = tr.max_terms;
    return j;
}

EnvironmentSpec parse_environment(const json& j, const std::string& path) {
    Obj o(j, path);
    EnvironmentSpec e;
    if (const json* v = o.get("family")) e.family = as_enum(*v, o.at("family"), marginal_family_from_string);
    o.text("label", e.label);
    if (const json* v = o.get("coords")) {
        if (!v->is_array()) fail(o.at("coords"), "expected an array");
        for (std::size_t q = 0; q < v->size(); ++q) {
            Obj c((*v)[q], o.at("coords") + "/" + std::to_string(q));
            CoordinateLaw law;
            c.number("value", law.value);
            c.number("lo", law.lo);
            c.number("hi", law.hi);
            c.number("shape_a", law.shape_a);
            c.number("shape_b", law.shape_b);
            c.number("mean", law.mean);
            c.number("sd", law.sd);
            c.finish();
            e.coords.push_back(law);
        }
    }
    o.finish();
    try {
        e.validate();
    } catch (const ConfigError& err) {
        fail(path, err.what());
    }
    return e;
}

json environment_json(const EnvironmentSpec& e) {
    json coords = json::array();
    for (const auto& c : e.coords)
        coords.push_back({{"value", c.value},
                          {"lo", c.lo},
                          {"hi", c.hi},
                          {"shape_a", c.shape_a},
                          {"shape_b", c.shape_b},
                          {"mean", c.mean},
                          {"sd", c.sd}});
    return {{"family", to_string(e.family)}, {"label", e.label}, {"coords", coords}};
}

KernelSpec parse_kernel(const json& j, const std::string& path) {
    Obj o(j, path);
    KernelSpec k;
    if (const json* v = o.get("kind")) k.kind = as_enum(*v, o.at("kind"), kernel_kind_from_string);
    o.numbers("table", k.table);
    o.number("rate", k.rate);
    o.number("exponent", k.exponent);
    o.finish();
    return k;
}

json kernel_json(const KernelSpec& k) {
    return {{"kind", to_string(k.kind)}, {"table", k.table}, {"rate", k.rate}, {"exponent", k.exponent}};
}

InnovationGeneratorSpec parse_innovations(const json& j, const std::string& path) {
    Obj o(j, path);
    InnovationGeneratorSpec s;
    if (const json* v = o.get("kind")) s.kind = as_enum(*v, o.at("kind"), innovation_kind_from_string);
    if (const json* v = o.get("input")) s.input = as_enum(*v, o.at("input"), input_law_from_string);
    o.integer("beta_lo", s.beta_lo);
    o.numbers("beta", s.beta);
    o.flag("causal", s.causal);
    if (const json* v = o.get("volterra")) {
        if (!v->is_array()) fail(o.at("volterra"), "expected an array");
        for (std::size_t q = 0; q < v->size(); ++q) {
            Obj t((*v)[q], o.at("volterra") + "/" + std::to_string(q));
            VolterraShiftTerm term;
            term.offsets = as_array<int>(t.need("offsets"), t.at("offsets"),
                                         [](const json& x, const std::string& px) { return static_cast<int>(as_integer(x, px)); });
            t.number("weight", term.weight);
            t.finish();
            s.volterra.push_back(std::move(term));
        }
    }
    o.integer("inner_lo", s.inner_lo);
    o.numbers("inner_beta", s.inner_beta);
    if (const json* v = o.get("kernel")) s.kernel = parse_kernel(*v, o.at("kernel"));
    o.text("label", s.label);
    o.finish();
    try {
        s.validate();
    } catch (const ConfigError& err) {
        fail(path, err.what());
    }
    return s;
}

json innovations_json(const InnovationGeneratorSpec& s) {
    json volterra = json::array();
    for (const auto& t : s.volterra) volterra.push_back({{"offsets", t.offsets}, {"weight", t.weight}});
    return {{"kind", to_string(s.kind)},    {"input", to_string(s.input)},   {"beta_lo", s.beta_lo},
            {"beta", s.beta},               {"causal", s.causal},            {"volterra", volterra},
            {"inner_lo", s.inner_lo},       {"inner_beta", s.inner_beta},    {"kernel", kernel_json(s.kernel)},
            {"label", s.label}};
}

std::string_view rule_name(NormalizationRule r) {
    switch (r) {
        case NormalizationRule::Sqrt:
            return "sqrt";
        case NormalizationRule::N:
            return "n";
        case NormalizationRule::Custom:
            return "custom";
    }
    return "sqrt";
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    Obj root(j, "");
    ExperimentConfig c;
    if (const json* v = root.get("seed")) {
        if (!v->is_number_unsigned()) fail("/seed", "expected an unsigned 64-bit integer");
        c.seed = v->get<std::uint64_t>();
    }
    if (const json* v = root.get("threads")) c.threads = static_cast<unsigned>(as_count(*v, "/threads"));
    if (const json* v = root.get("environment")) c.environment = parse_environment(*v, "/environment");
    if (c.environment.coords.empty()) c.environment.coords.push_back(CoordinateLaw{});
    if (const json* v = root.get("innovations")) c.innovations = parse_innovations(*v, "/innovations");
    if (const json* v = root.get("model")) {
        Obj o(*v, "/model");
        c.model = parse_model(o);
        o.integer("k_max", c.truncation.k_max);
        o.integer("m", c.truncation.m);
        o.number("prune_tol", c.truncation.prune_tol);
        o.count("max_terms", c.truncation.max_terms);
        o.finish();
        if (c.truncation.k_max < 1) fail("/model/k_max", "must be >= 1");
        if (c.truncation.m < 0) fail("/model/m", "must be >= 0");
    }
    if (const json* v = root.get("aggregation")) {
        Obj o(*v, "/aggregation");
        o.counts("n_grid", c.aggregation.n_grid);
        if (const json* r = o.get("normalization")) {
            const std::string s = as_string(*r, o.at("normalization"));
            if (s == "sqrt") c.aggregation.rule = NormalizationRule::Sqrt;
            else if (s == "n") c.aggregation.rule = NormalizationRule::N;
            else if (s == "custom") c.aggregation.rule = NormalizationRule::Custom;
            else fail(o.at("normalization"), "expected sqrt, n or custom");
        }
        o.number("custom_constant", c.aggregation.custom_constant);
        o.integers("taus", c.aggregation.taus);
        o.finish();
        if (c.aggregation.n_grid.empty()) fail("/aggregation/n_grid", "must not be empty");
        for (std::size_t n : c.aggregation.n_grid)
            if (n == 0) fail("/aggregation/n_grid", "entries must be positive");
    }
    if (const json* v = root.get("validation")) {
        Obj o(*v, "/validation");
        auto& s = c.validation;
        o.count("replicates", s.replicates);
        o.count("length", s.length);
        o.integers("time_points", s.time_points);
        o.numbers("combination", s.combination);
        o.number("delta", s.delta);
        o.number("level", s.level);
        o.number("alpha", s.alpha);
        o.number("beta", s.beta);
        if (const json* d = o.get("decay_exponent")) s.decay_exponent = as_number(*d, o.at("decay_exponent"));
        o.count("env_seeds", s.env_seeds);
        o.count("mc_samples", s.mc_samples);
        o.count("check_samples", s.check_samples);
        o.integer("chi_r_max", s.chi_r_max);
        o.number("band_tolerance", s.band_tolerance);
        if (const json* p = o.get("probes")) {
            Obj q(*p, o.at("probes"));
            q.count("units", s.probes.units);
            q.count("replicates", s.probes.replicates);
            q.count("trials", s.probes.trials);
            q.integers("gaps", s.probes.gaps);
            q.count("block", s.probes.block);
            q.finish();
        }
        o.finish();
        if (!(s.delta > 0.0)) fail("/validation/delta", "must be positive");
        if (!(s.level > 0.0 && s.level < 1.0)) fail("/validation/level", "must lie in (0, 1)");
        if (!s.combination.empty() && s.combination.size() != s.time_points.size())
            fail("/validation/combination", "needs one weight per time point");
        if (s.length == 0) fail("/validation/length", "must be positive");
    }
    if (const json* v = root.get("output")) {
        Obj o(*v, "/output");
        o.text("dir", c.output.dir);
        if (const json* f = o.get("formats")) {
            c.output.formats = as_array<std::string>(*f, o.at("formats"), as_string);
            for (const auto& s : c.output.formats)
                if (s != "csv" && s != "json") fail(o.at("formats"), "formats are csv and json");
        }
        o.text("panel_format", c.output.panel_format);
        if (c.output.panel_format != "csv" && c.output.panel_format != "binary")
            fail(o.at("panel_format"), "expected csv or binary");
        o.flag("write_panels", c.output.write_panels);
        o.finish();
    }
    root.finish();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

json resolved_config(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["environment"] = environment_json(c.environment);
    j["innovations"] = innovations_json(c.innovations);
    j["model"] = model_json(c.model, c.truncation);
    j["aggregation"] = {{"n_grid", c.aggregation.n_grid},
                        {"normalization", rule_name(c.aggregation.rule)},
                        {"custom_constant", c.aggregation.custom_constant},
                        {"taus", c.aggregation.taus}};
    const auto& s = c.validation;
    j["validation"] = {{"replicates", s.replicates},
                       {"length", s.length},
                       {"time_points", s.time_points},
                       {"combination", s.combination},
                       {"delta", s.delta},
                       {"level", s.level},
                       {"alpha", s.alpha},
                       {"beta", s.beta},
                       {"env_seeds", s.env_seeds},
                       {"mc_samples", s.mc_samples},
                       {"check_samples", s.check_samples},
                       {"chi_r_max", s.chi_r_max},
                       {"band_tolerance", s.band_tolerance},
                       {"probes",
                        {{"units", s.probes.units},
                         {"replicates", s.probes.replicates},
                         {"trials", s.probes.trials},
                         {"gaps", s.probes.gaps},
                         {"block", s.probes.block}}}};
    if (s.decay_exponent) j["validation"]["decay_exponent"] = *s.decay_exponent;
    j["output"] = {{"dir", c.output.dir},
                   {"formats", c.output.formats},
                   {"panel_format", c.output.panel_format},
                   {"write_panels", c.output.write_panels}};
    return j;
}

}  // namespace dsagg
