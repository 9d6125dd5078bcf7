#include "dsagg/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "dsagg/errors.hpp"

namespace dsagg {

std::string format_double(double v) { return fmt::format("{}", v); }

PanelMatrix to_matrix(const InnovationPanel& p) { return {p.n, p.t_min, p.width, p.values}; }
PanelMatrix to_matrix(const ElementaryPanel& p) { return {p.n, p.t_min, p.width, p.values}; }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error("write failed for " + path.string());
}

void save_panel(const std::filesystem::path& path, const PanelMatrix& panel, PanelFormat format,
                const nlohmann::json& meta) {
    nlohmann::json side = meta;
    side["n"] = panel.n;
    side["t_min"] = panel.t_min;
    side["width"] = panel.width;
    side["format"] = format == PanelFormat::Csv ? "csv" : "binary";
    if (format == PanelFormat::Csv) {
        std::string text;
        for (std::size_t i = 0; i < panel.n; ++i) {
            for (std::size_t c = 0; c < panel.width; ++c) {
                if (c) text += ',';
                text += format_double(panel.values[i * panel.width + c]);
            }
            text += '\n';
        }
        write_text_file(path, text);
    } else {
        static_assert(std::endian::native == std::endian::little, "binary panels assume little-endian hosts");
        std::string bytes(panel.values.size() * sizeof(double), '\0');
        if (!bytes.empty()) std::memcpy(bytes.data(), panel.values.data(), bytes.size());
        write_text_file(path, bytes);
    }
    write_text_file(path.string() + ".json", side.dump(2) + "\n");
}

PanelMatrix load_panel(const std::filesystem::path& path) {
    std::ifstream sf(path.string() + ".json");
    if (!sf) throw Error("missing sidecar " + path.string() + ".json");
    nlohmann::json side;
    try {
        sf >> side;
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad sidecar " + path.string() + ".json: " + e.what());
    }
    PanelMatrix p;
    p.n = side.at("n").get<std::size_t>();
    p.t_min = side.at("t_min").get<long>();
    p.width = side.at("width").get<std::size_t>();
    p.values.resize(p.n * p.width);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    if (side.at("format") == "binary") {
        f.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(p.values.size() * sizeof(double)));
        if (!f) throw Error("short read in " + path.string());
        return p;
    }
    std::string line;
    for (std::size_t i = 0; i < p.n; ++i) {
        if (!std::getline(f, line)) throw Error("missing row " + std::to_string(i) + " in " + path.string());
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t c = 0; c < p.width; ++c) {
            if (!std::getline(ss, cell, ',')) throw Error("short row " + std::to_string(i) + " in " + path.string());
            p.values[i * p.width + c] = std::stod(cell);
        }
    }
    return p;
}

void write_path_csv(std::ostream& out, const AggregatePath& path) {
    out << "t,x\n";
    for (std::size_t c = 0; c < path.x.size(); ++c)
        out << path.t_min + static_cast<long>(c) << ',' << format_double(path.x[c]) << '\n';
}

void write_covariance_csv(std::ostream& out, const CovarianceTable& table) {
    out << "tau,value,err_or_bound,kind\n";
    for (const auto& r : table.rows)
        out << r.tau << ',' << format_double(r.value) << ',' << format_double(r.err) << ',' << to_string(table.kind)
            << '\n';
}

void write_chi_csv(std::ostream& out, std::span<const ChiEstimate> chi) {
    out << "r,value,stderr\n";
    for (const auto& c : chi) out << c.r << ',' << format_double(c.value) << ',' << format_double(c.stderr_) << '\n';
}

void write_profile_csv(std::ostream& out, const DependenceProfile& profile) {
    out << "r,value,stderr\n";
    for (std::size_t s = 0; s < profile.bound.size(); ++s) out << s << ',' << format_double(profile.bound[s]) << ",0\n";
}

nlohmann::json to_json(const ExistenceReport& r) {
    nlohmann::json j;
    j["model"] = to_string(r.model);
    j["mc_samples"] = r.mc_samples;
    j["overall"] = to_string(r.overall());
    j["conditions"] = nlohmann::json::array();
    for (const auto& c : r.conditions)
        j["conditions"].push_back({{"condition_id", c.condition_id},
                                   {"description", c.description},
                                   {"verdict", to_string(c.verdict)},
                                   {"estimate", c.estimate},
                                   {"stderr", c.stderr_},
                                   {"violation_fraction", c.violation_fraction}});
    return j;
}

nlohmann::json to_json(const MomentReport& r) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [n, v] : r.stability_curve) curve.push_back({{"clusters", n}, {"estimate", v}});
    return {{"delta", r.delta},
            {"estimate", r.estimate},
            {"stderr", r.stderr_},
            {"half_sample_estimate", r.half_sample_estimate},
            {"half_sample_stderr", r.half_sample_stderr},
            {"heavy_tailed", r.heavy_tailed},
            {"stability_curve", curve}};
}

nlohmann::json to_json(const ExponentWindow& w) {
    nlohmann::json j{{"family", to_string(w.family)}, {"delta", w.delta},       {"decay", w.decay},
                     {"threshold", w.threshold},      {"alpha_max", w.alpha_max}, {"empty", w.empty}};
    if (!w.empty) {
        j["alpha"] = w.alpha;
        j["beta"] = w.beta;
    }
    return j;
}

nlohmann::json to_json(const NormalityReport& r, bool with_qq) {
    nlohmann::json j{{"n", r.n},
                     {"target_variance", r.target_variance},
                     {"target_source", r.target_source},
                     {"ks", r.ks},
                     {"p_value", r.p_value},
                     {"skewness", r.skewness},
                     {"skew_stderr", r.skew_stderr},
                     {"excess_kurtosis", r.excess_kurtosis},
                     {"kurt_stderr", r.kurt_stderr}};
    if (!std::isnan(r.cf_distance)) j["cf_distance"] = r.cf_distance;
    if (with_qq) {
        j["qq"] = nlohmann::json::array();
        for (const auto& [q, v] : r.qq) j["qq"].push_back({q, v});
    }
    return j;
}

nlohmann::json to_json(const ProbeReport& r) {
    nlohmann::json j{{"gap", r.gap},
                     {"epsilon", r.epsilon},
                     {"pass", r.pass()},
                     {"coefficient_lower_bound", r.coefficient_lower_bound}};
    j["entries"] = nlohmann::json::array();
    for (const auto& e : r.entries)
        j["entries"].push_back({{"f", e.f},
                                {"g", e.g},
                                {"cov", e.cov},
                                {"stderr", e.stderr_},
                                {"bound", e.bound},
                                {"margin", e.margin},
                                {"pass", e.pass}});
    return j;
}

nlohmann::json to_json(const CovarianceBoundResult& r) {
    return {{"cov", r.cov},     {"stderr", r.stderr_}, {"constant", r.constant}, {"decay", r.decay},
            {"bound", r.bound}, {"margin", r.margin},  {"pass", r.pass}};
}

nlohmann::json to_json(const GammaLimit& g) {
    return {{"value", g.value},
            {"stderr", g.stderr_},
            {"gamma_k", g.gamma_k},
            {"phi_k", g.phi_k},
            {"truncation_bound", g.truncation_bound},
            {"method", g.method}};
}

nlohmann::json to_json(const CltResult& r) {
    nlohmann::json j;
    j["gamma0"] = r.gamma0;
    j["trend_ok"] = r.trend_ok;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : r.cells)
        j["cells"].push_back({{"n", c.n},
                              {"env_seed", c.env_seed},
                              {"statistic", c.statistic},
                              {"gamma_n", c.gamma_n},
                              {"vs_limit", to_json(c.vs_limit)},
                              {"vs_exact", to_json(c.vs_exact)}});
    j["summary"] = nlohmann::json::array();
    for (std::size_t q = 0; q < r.median_ks.size(); ++q)
        j["summary"].push_back({{"n", r.median_ks[q].first},
                                {"median_ks", r.median_ks[q].second},
                                {"median_p", r.median_p[q].second},
                                {"median_ks_exact", r.median_ks_exact[q].second}});
    return j;
}

nlohmann::json to_json(const SllnResult& r) {
    nlohmann::json j;
    j["limits"] = nlohmann::json::array();
    for (const auto& g : r.limits) j["limits"].push_back(to_json(g));
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows)
        j["rows"].push_back(
            {{"n", row.n}, {"tau", row.tau}, {"median_abs_diff", row.median_abs_diff}, {"gamma_n", row.gamma_n}});
    j["shrink"] = r.shrink;
    j["monotone"] = r.monotone;
    j["exact"] = r.exact;
    return j;
}

}  // namespace dsagg
