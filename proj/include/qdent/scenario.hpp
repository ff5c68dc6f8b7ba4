#pragma once

// Bundled reference scenario: a nanowire-dot source with S = 18 ueV,
// 2 ns exciton lifetime and 35 ps combined IRF, postselected in three
// 65 ps windows. The dephasing time is calibrated once so the first
// window reaches a concurrence of 0.57; every other number is then a
// prediction that the report compares against its target band.

#include "qdent/io.hpp"
#include "qdent/metrics.hpp"
#include "qdent/tomography.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qdent {

struct ReferenceScenario {
    RunConfig config;  // calibrated cascade + detector + run parameters
    std::array<std::pair<double, double>, 3> windows_ps;  // (start, width)
    double period_ps = 0.0;  // 2 pi hbar / S
};

// Bisects the cross-dephasing time until the windowed concurrence hits
// target_concurrence (monotone in the dephasing time).
double calibrate_dephasing(CascadeParams params, double window_start_ps,
                           double window_width_ps, double target_concurrence);

ReferenceScenario make_reference_scenario(std::uint64_t seed = 1);

struct ScenarioCheck {
    std::string name;
    double value = 0.0;
    double lo = 0.0;  // inclusive target band
    double hi = 0.0;
    bool passed = false;
};

struct WindowResult {
    double start_ps = 0.0;
    double width_ps = 0.0;
    double concurrence_model = 0.0;  // from the windowed density
    double concurrence_mle = 0.0;    // after tomography round trip
    double fidelity_phi_plus = 0.0;
    double fidelity_phi_minus = 0.0;
    PhaseReference best_phase{};
    DensityMatrix rho_mle = DensityMatrix::Zero();
    TomographyInput counts{};
};

struct ScenarioReport {
    ReferenceScenario scenario;
    double dephasing_ps = 0.0;
    FitResult fit_dd;
    FitResult fit_rr;
    double phase_diff_deg = 0.0;
    double hv_hh_ratio = 0.0;
    double g2_center = 0.0;
    std::vector<WindowResult> windows;
    ErrorBarReport resampling;
    std::vector<ScenarioCheck> checks;
    bool all_passed = false;

    CoincidenceHistogram hist_dd_expected;
    CoincidenceHistogram hist_rr_expected;
    CoincidenceHistogram hist_dd_sampled;
    CoincidenceHistogram hist_rr_sampled;
    CoincidenceHistogram g2_hist;
};

// Runs the full scenario: DD/RR oscillation fits on simulated data,
// windowed tomography with metrics, HV suppression, emitter
// autocorrelation and count-resampling error bars.
ScenarioReport run_reference_scenario(std::uint64_t seed = 1);

// Noiseless 16-setting counts predicted by rho at the given exposure.
TomographyInput counts_from_density(const DensityMatrix& rho, double exposure);

Json scenario_report_to_json(const ScenarioReport& report);
std::string scenario_report_to_markdown(const ScenarioReport& report);

}  // namespace qdent
