#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsagg/aggregation.hpp"
#include "dsagg/environment.hpp"
#include "dsagg/innovations.hpp"
#include "dsagg/models.hpp"

namespace dsagg {

struct AggregationSection {
    std::vector<std::size_t> n_grid{100};
    NormalizationRule rule = NormalizationRule::Sqrt;
    double custom_constant = 1.0;
    std::vector<long> taus{0, 1, 2};
};

struct ProbeSection {
    std::size_t units = 12;
    std::size_t replicates = 400;
    std::size_t trials = 200;
    std::vector<long> gaps{1, 2, 8};
    std::size_t block = 2;
};

struct ValidationSection {
    std::size_t replicates = 2000;
    std::size_t length = 256;  ///< T for simulate
    std::vector<long> time_points{0, 1, 2};
    std::vector<double> combination;
    double delta = 1.0;
    double level = 0.05;
    /// Bernstein exponents; 0 picks the interior point of the exponent window.
    double alpha = 0.0;
    double beta = 0.0;
    /// Decay exponent of the dependence profile; unset means estimated from the profile.
    std::optional<double> decay_exponent;
    std::size_t env_seeds = 5;
    std::size_t mc_samples = 20000;     ///< Gamma limit
    std::size_t check_samples = 20000;  ///< existence, K5 and moment checks
    int chi_r_max = 16;
    double band_tolerance = 1e-17;
    ProbeSection probes;
};

struct OutputSection {
    std::string dir = "out";
    std::vector<std::string> formats{"csv", "json"};
    std::string panel_format = "csv";  ///< "csv" | "binary"
    bool write_panels = true;
};

struct ExperimentConfig {
    EnvironmentSpec environment;
    InnovationGeneratorSpec innovations;
    CoefficientModel model = LinearModel{SequenceMap::finite(0, {1.0})};
    Truncation truncation{};
    AggregationSection aggregation;
    ValidationSection validation;
    OutputSection output;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

/// Parses and validates a config tree. Unknown keys and bad values raise ConfigError whose message
/// starts with the JSON pointer of the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// The config with every default filled in; parse_config(resolved_config(c)) reproduces c. The
/// thread budget is left out: it never changes results.
nlohmann::json resolved_config(const ExperimentConfig& c);

}  // namespace dsagg
