#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsagg/config.hpp"

namespace dsagg {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitHypothesis = 2 };

/// Outcome of the hypothesis checks; `failed` lists condition ids that failed outright.
struct CheckOutcome {
    nlohmann::json report;
    std::vector<std::string> failed;
};

enum class CheckScope { All, Clt, Slln, Probes };

CheckOutcome run_checks(const ExperimentConfig& config, CheckScope scope = CheckScope::All);

/// Decay exponent of a profile: the configured value, a large sentinel for eventually-zero
/// profiles, or a log-log slope over the last three quarters of the profile.
double profile_decay_exponent(const DependenceProfile& profile);

/// Entry point shared by the dsagg binary and the tests. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsagg
