#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dsagg/commands.hpp"
#include "dsagg/config.hpp"
#include "dsagg/errors.hpp"

using namespace dsagg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs{DSAGG_CONFIG_DIR};

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dsagg_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

int cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    return run_cli(args, out, err);
}

fs::path write_config(const fs::path& dir, const json& j) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string config_error(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool contains(const json& arr, const std::string& s) {
    for (const auto& v : arr)
        if (v == s) return true;
    return false;
}

}  // namespace

TEST_CASE("config errors name the offending key") {
    const json base = read_json(kConfigs / "iid_trivial.json");
    json bad = base;
    bad["environment"]["coords"][0]["valu"] = 1.0;
    CHECK(config_error(bad).find("/environment/coords/0") != std::string::npos);

    bad = base;
    bad["model"]["tag"] = "garch99";
    CHECK(config_error(bad).find("/model/tag") != std::string::npos);

    bad = base;
    bad["aggregation"]["n_grid"] = "many";
    CHECK(config_error(bad).find("/aggregation/n_grid") != std::string::npos);

    bad = base;
    bad["output"]["panel_format"] = "parquet";
    CHECK(config_error(bad).find("/output/panel_format") != std::string::npos);
}

TEST_CASE("resolved config round-trips") {
    for (const char* name : {"iid_trivial.json", "clt_linear.json", "slln_order1.json", "probes_linear.json",
                             "arch1_fail.json", "common_innovation.json"}) {
        const auto c = load_config((kConfigs / name).string());
        const json r = resolved_config(c);
        CHECK(resolved_config(parse_config(r)) == r);
        CHECK_FALSE(r.contains("threads"));
    }
}

TEST_CASE("check exit codes and named failures") {
    const fs::path ok = scratch("check_ok");
    CHECK(cli({"check", "--config", (kConfigs / "iid_trivial.json").string(), "--out", ok.string()}) == kExitOk);
    CHECK(read_json(ok / "check.json")["verdict"] == "pass");
    CHECK(fs::exists(ok / "resolved_config.json"));

    const fs::path arch = scratch("check_arch");
    CHECK(cli({"check", "--config", (kConfigs / "arch1_fail.json").string(), "--out", arch.string()}) == kExitHypothesis);
    CHECK(contains(read_json(arch / "check.json")["failed"], "arch1.sqrt_lambda2_alpha_lt_1"));

    const fs::path common = scratch("check_common");
    CHECK(cli({"check", "--config", (kConfigs / "common_innovation.json").string(), "--out", common.string()}) ==
          kExitHypothesis);
    CHECK(contains(read_json(common / "check.json")["failed"], "chi.summable"));

    CHECK(cli({"check", "--config", "/nonexistent/config.json"}) == kExitRuntime);
    CHECK(cli({"bogus"}) == kExitRuntime);
}

TEST_CASE("simulate is deterministic and reduces to the elementary path at N = 1") {
    json j = read_json(kConfigs / "iid_trivial.json");
    j["aggregation"]["n_grid"] = {1};
    j["innovations"] = {{"kind", "linear_shift"}, {"beta_lo", -1}, {"beta", {0.5, 1.0, 0.5}}};
    j["model"]["c"]["values"] = {1.0, 0.4};
    j["validation"]["length"] = 32;
    const fs::path dir = scratch("simulate");
    const fs::path cfg = write_config(dir, j);

    CHECK(cli({"simulate", "--config", cfg.string(), "--out", (dir / "a").string()}) == kExitOk);
    CHECK(cli({"simulate", "--config", cfg.string(), "--out", (dir / "b").string(), "--threads", "3"}) == kExitOk);
    for (const char* f : {"aggregate.csv", "elementary.csv", "innovations.csv", "environment.csv", "covariance.csv",
                          "simulate.json", "elementary.csv.json"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    // only the output directory differs between the two resolved configs
    json ra = read_json(dir / "a" / "resolved_config.json"), rb = read_json(dir / "b" / "resolved_config.json");
    ra["output"].erase("dir");
    rb["output"].erase("dir");
    CHECK(ra == rb);

    // aggregate.csv rows are "t,x"; elementary.csv holds the single row of Z
    std::istringstream agg(slurp(dir / "a" / "aggregate.csv"));
    std::string line;
    std::getline(agg, line);
    std::vector<std::string> xs;
    while (std::getline(agg, line)) xs.push_back(line.substr(line.find(',') + 1));
    std::istringstream el(slurp(dir / "a" / "elementary.csv"));
    std::getline(el, line);
    std::vector<std::string> zs;
    std::istringstream row(line);
    for (std::string v; std::getline(row, v, ',');) zs.push_back(v);
    CHECK(xs.size() == 32);
    CHECK(xs == zs);

    const json resolved = read_json(dir / "a" / "resolved_config.json");
    CHECK(resolved["aggregation"]["n_grid"] == json::array({1}));
    CHECK(resolved["validation"]["length"] == 32);
}

TEST_CASE("validate refuses failing hypotheses unless forced") {
    json j = read_json(kConfigs / "common_innovation.json");
    j["aggregation"] = {{"n_grid", {20, 40}}, {"taus", {0}}};
    j["validation"]["env_seeds"] = 2;
    const fs::path dir = scratch("refuse");
    const fs::path cfg = write_config(dir, j);
    CHECK(cli({"validate", "slln", "--config", cfg.string(), "--out", (dir / "r").string()}) == kExitHypothesis);
    CHECK(fs::exists(dir / "r" / "slln_refused.json"));
    CHECK_FALSE(fs::exists(dir / "r" / "slln.json"));
    // the limit itself is undefined for a common innovation, so even a forced run cannot succeed
    CHECK(cli({"validate", "slln", "--config", cfg.string(), "--out", (dir / "f").string(), "--force"}) == kExitRuntime);

    json a = read_json(kConfigs / "arch1_fail.json");
    a["validation"]["probes"] = {{"units", 6}, {"replicates", 100}, {"trials", 2}, {"gaps", {1, 3}}, {"block", 1}};
    a["validation"]["check_samples"] = 500;
    const fs::path acfg = write_config(dir, a);
    CHECK(cli({"validate", "probes", "--config", acfg.string(), "--out", (dir / "p").string()}) == kExitHypothesis);

    // a slowly decaying kernel leaves the exponent window empty but the experiment is well defined
    json w = read_json(kConfigs / "iid_trivial.json");
    w["innovations"] = {{"kind", "gaussian_stationary"}, {"kernel", {{"kind", "power_law"}, {"exponent", 1.5}}}};
    w["aggregation"]["n_grid"] = {8, 16};
    w["validation"]["replicates"] = 120;
    w["validation"]["env_seeds"] = 1;
    w["validation"]["time_points"] = {0};
    const fs::path wcfg = write_config(dir, w);
    CHECK(cli({"validate", "clt", "--config", wcfg.string(), "--out", (dir / "w").string()}) == kExitHypothesis);
    CHECK(contains(read_json(dir / "w" / "clt_refused.json")["failed"], "clt.exponent_window"));
    CHECK(cli({"validate", "clt", "--config", wcfg.string(), "--out", (dir / "wf").string(), "--force"}) == kExitOk);
    CHECK(read_json(dir / "wf" / "clt.json")["annotation"] == "hypotheses unverified");
}

TEST_CASE("slln control run reports exact equality") {
    const fs::path dir = scratch("slln_iid");
    CHECK(cli({"validate", "slln", "--config", (kConfigs / "iid_trivial.json").string(), "--out", dir.string()}) ==
          kExitOk);
    const json r = read_json(dir / "slln.json");
    CHECK(r["result"]["exact"] == true);
    CHECK_FALSE(r.contains("annotation"));
}

TEST_CASE("estimate-chi recovers the shift kernel") {
    json j = read_json(kConfigs / "iid_trivial.json");
    j["innovations"] = {{"kind", "linear_shift"}, {"beta_lo", 0}, {"beta", {1.0, 1.0}}};
    j["aggregation"]["n_grid"] = {64};
    j["validation"]["length"] = 500;
    const fs::path dir = scratch("chi");
    const fs::path cfg = write_config(dir, j);
    CHECK(cli({"estimate-chi", "--config", cfg.string(), "--out", (dir / "o").string()}) == kExitOk);
    std::istringstream s(slurp(dir / "o" / "chi.csv"));
    std::string line;
    std::getline(s, line);
    CHECK(line == "r,value,stderr");
    std::getline(s, line);
    std::getline(s, line);
    std::istringstream row(line);
    std::string r, v, e;
    std::getline(row, r, ',');
    std::getline(row, v, ',');
    std::getline(row, e, ',');
    CHECK(r == "1");
    CHECK(std::abs(std::stod(v) - 0.5) < 3.0 * std::stod(e));
    CHECK(fs::exists(dir / "o" / "profile.csv"));
}

TEST_CASE("output format selection") {
    const fs::path dir = scratch("format");
    CHECK(cli({"check", "--config", (kConfigs / "iid_trivial.json").string(), "--out", dir.string(), "--format",
               "json"}) == kExitOk);
    CHECK(fs::exists(dir / "check.json"));
    CHECK_FALSE(fs::exists(dir / "check.csv"));
}
