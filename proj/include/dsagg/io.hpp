#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsagg/aggregation.hpp"
#include "dsagg/environment.hpp"
#include "dsagg/innovations.hpp"
#include "dsagg/validation.hpp"

namespace dsagg {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

enum class PanelFormat { Csv, Binary };

/// Matrix with one row per unit i and one column per time t in [t_min, t_min + width).
struct PanelMatrix {
    std::size_t n = 0;
    long t_min = 0;
    std::size_t width = 0;
    std::vector<double> values;
};

PanelMatrix to_matrix(const InnovationPanel& p);
PanelMatrix to_matrix(const ElementaryPanel& p);

/// Writes path (".csv" or ".bin") and path + ".json" holding `meta` plus the shape. The binary
/// layout is little-endian doubles, row-major. IO failures raise Error naming the file.
void save_panel(const std::filesystem::path& path, const PanelMatrix& panel, PanelFormat format,
                const nlohmann::json& meta);
PanelMatrix load_panel(const std::filesystem::path& path);

void write_path_csv(std::ostream& out, const AggregatePath& path);
void write_covariance_csv(std::ostream& out, const CovarianceTable& table);
void write_chi_csv(std::ostream& out, std::span<const ChiEstimate> chi);
void write_profile_csv(std::ostream& out, const DependenceProfile& profile);

nlohmann::json to_json(const ExistenceReport& r);
nlohmann::json to_json(const MomentReport& r);
nlohmann::json to_json(const ExponentWindow& w);
nlohmann::json to_json(const NormalityReport& r, bool with_qq = false);
nlohmann::json to_json(const ProbeReport& r);
nlohmann::json to_json(const CovarianceBoundResult& r);
nlohmann::json to_json(const CltResult& r);
nlohmann::json to_json(const SllnResult& r);
nlohmann::json to_json(const GammaLimit& g);

/// Writes text to a file, creating parent directories; raises Error with the path on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dsagg
