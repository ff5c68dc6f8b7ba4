#pragma once

#include "qdent/cascade.hpp"
#include "qdent/coincidence.hpp"
#include "qdent/fitting.hpp"
#include "qdent/histogram.hpp"
#include "qdent/tomography.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace qdent {

using Json = nlohmann::json;

// Aggregated run configuration, stored as a flat key = value file with
// units encoded in the key names. Unknown keys are rejected by name.
struct RunConfig {
    CascadeParams cascade;
    DetectorModel detector;
    double rep_period_ps = 13158.0;  // 76 MHz pulsed excitation
    long long n_pulses = 1000000;
    std::uint64_t seed = 1;
    Binning binning{16.0, 0.0, 128};
    std::vector<std::pair<double, double>> windows_ps;  // (start, width)

    void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

// Stable content hash of the canonical config text (for run manifests).
std::uint64_t config_hash(const RunConfig& config);

// Analyzer settings: {label, qwp_deg, hwp_deg, pol_deg}; qwp_deg is null
// when the quarter-wave plate is out of the path.
Json analyzer_setting_to_json(const AnalyzerSetting& setting);
AnalyzerSetting analyzer_setting_from_json(const Json& j);

Json setting_pairs_to_json(const std::vector<SettingPair>& pairs);
std::vector<SettingPair> setting_pairs_from_json(const Json& j);
std::vector<SettingPair> load_setting_pairs(const std::filesystem::path& path);

// Density matrices: {"re": 4x4, "im": 4x4}.
Json density_to_json(const DensityMatrix& rho);
DensityMatrix density_from_json(const Json& j);
DensityMatrix load_density(const std::filesystem::path& path);

// Histograms: CSV "bin_start_ps,counts", one row per bin left edge.
std::string histogram_to_csv(const CoincidenceHistogram& hist);
CoincidenceHistogram histogram_from_csv(const std::string& text);
void save_histogram(const CoincidenceHistogram& hist,
                    const std::filesystem::path& path);
CoincidenceHistogram load_histogram(const std::filesystem::path& path);

// Streams: CSV "channel,time_ps" with channel in {XX, X}.
std::string stream_to_csv(const TimeTagStream& stream);
TimeTagStream stream_from_csv(const std::string& text);
TimeTagStream load_stream(const std::filesystem::path& path);

// Tomography counts: CSV "label_xx,label_x,counts" over canonical labels.
std::string tomography_to_csv(const TomographyInput& input);
TomographyInput tomography_from_csv(const std::string& text);
TomographyInput load_tomography(const std::filesystem::path& path);

Json fit_result_to_json(const FitResult& fit);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace qdent
