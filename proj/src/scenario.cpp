#include "qdent/scenario.hpp"

#include "qdent/rng.hpp"
#include "qdent/units.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qdent {

namespace {

constexpr double kWindowWidthPs = 65.0;
constexpr double kTargetWindow1Concurrence = 0.57;

// Window centers sit at pair phases of 70, 160 and 540 degrees: the two
// reconstruction windows straddling the first oscillation and the later
// one where coherence has died out.
constexpr double kWindowPhasesDeg[3] = {70.0, 160.0, 540.0};

}  // namespace

double calibrate_dephasing(CascadeParams params, double window_start_ps,
                           double window_width_ps, double target_concurrence) {
    auto window_concurrence = [&](double tdeph) {
        params.cross_dephasing_ps = tdeph;
        return concurrence(time_windowed_density(params, window_start_ps,
                                                 window_width_ps));
    };

    double lo = 5.0, hi = 50000.0;
    if (window_concurrence(hi) < target_concurrence) {
        throw std::runtime_error("calibration target concurrence unreachable");
    }
    if (window_concurrence(lo) > target_concurrence) {
        throw std::runtime_error("calibration target concurrence exceeded at floor");
    }
    for (int i = 0; i < 60; ++i) {
        double mid = 0.5 * (lo + hi);
        if (window_concurrence(mid) < target_concurrence) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

ReferenceScenario make_reference_scenario(std::uint64_t seed) {
    ReferenceScenario s;
    s.config.cascade.fss_uev = 18.0;
    s.config.cascade.exciton_lifetime_ps = 2000.0;
    s.config.cascade.biexciton_lifetime_ps = 1000.0;
    s.config.cascade.background_fraction = 0.08;
    s.config.cascade.ellipticity_delta = 0.0;
    s.config.cascade.qwp1_angle = 0.0;
    s.config.cascade.phase_offset = 0.0;
    s.config.detector.irf_fwhm_ps = 35.0;
    s.config.detector.efficiency = 1.0;
    s.config.detector.dark_rate_cps = 0.0;
    s.config.rep_period_ps = 13158.0;
    s.config.n_pulses = 1000000;
    s.config.seed = seed;
    s.config.binning = Binning{16.0, 0.0, 90};

    s.period_ps = 2.0 * kPi * kHbarUevPs / s.config.cascade.fss_uev;
    for (int w = 0; w < 3; ++w) {
        double center = kWindowPhasesDeg[w] / 360.0 * s.period_ps;
        s.windows_ps[w] = {center - 0.5 * kWindowWidthPs, kWindowWidthPs};
    }
    s.config.windows_ps.assign(s.windows_ps.begin(), s.windows_ps.end());

    s.config.cascade.cross_dephasing_ps =
        calibrate_dephasing(s.config.cascade, s.windows_ps[0].first,
                            s.windows_ps[0].second, kTargetWindow1Concurrence);
    return s;
}

TomographyInput counts_from_density(const DensityMatrix& rho, double exposure) {
    auto settings = standard_settings();
    std::vector<TomographyRecord> records;
    for (const auto& pair : settings) {
        TomographyRecord rec;
        rec.setting_xx = pair.first;
        rec.setting_x = pair.second;
        rec.counts = std::llround(exposure * predicted_probability(rho, pair));
        records.push_back(rec);
    }
    return TomographyInput::make(records);
}

namespace {

WindowResult analyze_window(const ReferenceScenario& scenario, int index,
                            std::uint64_t seed) {
    const auto [start, width] = scenario.windows_ps[static_cast<std::size_t>(index)];
    WindowResult out;
    out.start_ps = start;
    out.width_ps = width;

    DensityMatrix rho_model =
        time_windowed_density(scenario.config.cascade, start, width);
    out.concurrence_model = concurrence(rho_model);

    out.counts = counts_from_density(rho_model, 1e7);
    MleOptions options;
    options.seed = mix_seed(seed, 0x77AA00ULL + static_cast<std::uint64_t>(index));
    auto [rho, report] = mle_reconstruct(out.counts, options);
    out.rho_mle = rho;
    out.concurrence_mle = concurrence(rho);
    out.fidelity_phi_plus = fidelity_to_pure(rho, bell_phi_plus());
    out.fidelity_phi_minus = fidelity_to_pure(rho, bell_phi_minus());
    out.best_phase = best_phase_reference(rho);
    return out;
}

ScenarioCheck band(const std::string& name, double value, double lo, double hi) {
    return {name, value, lo, hi, value >= lo && value <= hi};
}

}  // namespace

ScenarioReport run_reference_scenario(std::uint64_t seed) {
    ScenarioReport report;
    report.scenario = make_reference_scenario(seed);
    const RunConfig& cfg = report.scenario.config;
    report.dephasing_ps = cfg.cascade.cross_dephasing_ps;

    auto pair_setting = [](char a, char b) {
        return SettingPair{canonical_setting(a), canonical_setting(b)};
    };

    // Correlation histograms of the calibrated source, analytic and
    // Monte Carlo, for the record and for plotting.
    auto dd = pair_setting('D', 'D');
    auto rr = pair_setting('R', 'R');
    report.hist_dd_expected =
        expected_histogram(cfg.cascade, cfg.detector, dd.first, dd.second,
                           static_cast<double>(cfg.n_pulses), cfg.binning);
    report.hist_rr_expected =
        expected_histogram(cfg.cascade, cfg.detector, rr.first, rr.second,
                           static_cast<double>(cfg.n_pulses), cfg.binning);
    report.hist_dd_sampled = correlate(
        sample_stream(cfg.cascade, cfg.detector, dd.first, dd.second,
                      cfg.rep_period_ps, cfg.n_pulses, mix_seed(cfg.seed, 0xDD)),
        cfg.binning);
    report.hist_rr_sampled = correlate(
        sample_stream(cfg.cascade, cfg.detector, rr.first, rr.second,
                      cfg.rep_period_ps, cfg.n_pulses, mix_seed(cfg.seed, 0x22)),
        cfg.binning);
    report.hist_dd_sampled.setting_label = "DD";
    report.hist_rr_sampled.setting_label = "RR";

    // Period / anti-phase stage. The contrast-decay channels are switched
    // off here: they do not move the oscillation nodes but they do break
    // the single-envelope form of the fit model (the oscillating part dies
    // at the dephasing rate while the pedestal follows the lifetime),
    // which would bias two independent free-phase fits in opposite
    // directions.
    CascadeParams osc = cfg.cascade;
    osc.cross_dephasing_ps = 1e15;
    osc.background_fraction = 0.0;
    CoincidenceHistogram osc_dd = correlate(
        sample_stream(osc, cfg.detector, dd.first, dd.second, cfg.rep_period_ps,
                      cfg.n_pulses, mix_seed(cfg.seed, 0xDD)),
        cfg.binning);
    CoincidenceHistogram osc_rr = correlate(
        sample_stream(osc, cfg.detector, rr.first, rr.second, cfg.rep_period_ps,
                      cfg.n_pulses, mix_seed(cfg.seed, 0x22)),
        cfg.binning);
    report.fit_dd = fit_damped_cosine(osc_dd);
    report.fit_rr = fit_damped_cosine(osc_rr);
    double dphi = std::remainder(
        report.fit_dd.param("phase") - report.fit_rr.param("phase"), 2.0 * kPi);
    report.phase_diff_deg = std::abs(rad_to_deg(dphi));

    // Time-integrated HV suppression over the full decay.
    Binning wide{10.0, -100.0, 1250};
    auto hv = pair_setting('H', 'V');
    auto hh = pair_setting('H', 'H');
    double hv_total =
        expected_histogram(cfg.cascade, cfg.detector, hv.first, hv.second,
                           static_cast<double>(cfg.n_pulses), wide)
            .total();
    double hh_total =
        expected_histogram(cfg.cascade, cfg.detector, hh.first, hh.second,
                           static_cast<double>(cfg.n_pulses), wide)
            .total();
    report.hv_hh_ratio = hv_total / hh_total;

    // Emitter autocorrelation stage.
    TimeTagStream g2_stream = sample_single_emitter_stream(
        cfg.rep_period_ps, 200000, cfg.cascade.exciton_lifetime_ps,
        /*p_two_photon=*/0.0, /*efficiency=*/0.3, /*dark_rate_cps=*/100.0,
        cfg.detector.irf_fwhm_ps, mix_seed(cfg.seed, 0x62));
    Binning g2_bins{cfg.rep_period_ps / 50.0, -0.5 * cfg.rep_period_ps,
                    50 * 6 + 25};
    report.g2_hist = g2_autocorrelation(channel_times(g2_stream, Channel::X),
                                        cfg.rep_period_ps, g2_bins);
    report.g2_center = g2_center_peak_ratio(report.g2_hist, cfg.rep_period_ps);

    // Windowed tomography.
    for (int w = 0; w < 3; ++w) {
        report.windows.push_back(analyze_window(report.scenario, w, seed));
    }

    // Error bars at measurement-scale counts (about 4000 pair events split
    // over the 16 projections).
    TomographyInput small =
        counts_from_density(time_windowed_density(cfg.cascade,
                                                  report.scenario.windows_ps[0].first,
                                                  report.scenario.windows_ps[0].second),
                            1000.0);
    std::vector<NamedReference> refs;
    double theta1 = report.windows[0].best_phase.theta;
    refs.push_back({"best_phase_w1", two_photon_state(theta1)});
    report.resampling = error_bars(small, 200, mix_seed(seed, 0xEB), refs);

    report.checks.push_back(band("fitted_period_rr_ps",
                                 report.fit_rr.param("period_ps"), 225.0, 235.0));
    report.checks.push_back(
        band("dd_rr_phase_diff_deg", report.phase_diff_deg, 175.0, 185.0));
    report.checks.push_back(band("window1_concurrence",
                                 report.windows[0].concurrence_mle, 0.51, 0.63));
    report.checks.push_back(band("window2_concurrence",
                                 report.windows[1].concurrence_mle, 0.35, 0.55));
    report.checks.push_back(
        band("window3_concurrence", report.windows[2].concurrence_mle, 0.0, 0.1));
    report.checks.push_back(band("window1_best_phase_fidelity",
                                 report.windows[0].best_phase.fidelity, 0.70, 0.82));
    report.checks.push_back(band("hv_hh_ratio", report.hv_hh_ratio, 0.0, 0.05));
    report.checks.push_back(band("g2_center_ratio", report.g2_center, 0.0, 0.05));
    report.checks.push_back(band("fidelity_stddev",
                                 report.resampling.fidelities.at(0).stddev, 0.005,
                                 0.05));
    report.all_passed = std::all_of(report.checks.begin(), report.checks.end(),
                                    [](const ScenarioCheck& c) { return c.passed; });
    return report;
}

Json scenario_report_to_json(const ScenarioReport& report) {
    Json j;
    j["config"] = format_run_config(report.scenario.config);
    j["config_hash"] = config_hash(report.scenario.config);
    j["seed"] = report.scenario.config.seed;
    j["period_from_fss_ps"] = report.scenario.period_ps;
    j["dephasing_ps"] = report.dephasing_ps;
    j["fit_dd"] = fit_result_to_json(report.fit_dd);
    j["fit_rr"] = fit_result_to_json(report.fit_rr);
    j["phase_diff_deg"] = report.phase_diff_deg;
    j["hv_hh_ratio"] = report.hv_hh_ratio;
    j["g2_center_ratio"] = report.g2_center;

    Json windows = Json::array();
    for (const auto& w : report.windows) {
        Json wj;
        wj["start_ps"] = w.start_ps;
        wj["width_ps"] = w.width_ps;
        wj["concurrence_model"] = w.concurrence_model;
        wj["concurrence_mle"] = w.concurrence_mle;
        wj["fidelity_phi_plus"] = w.fidelity_phi_plus;
        wj["fidelity_phi_minus"] = w.fidelity_phi_minus;
        wj["best_phase_deg"] = rad_to_deg(w.best_phase.theta);
        wj["best_phase_fidelity"] = w.best_phase.fidelity;
        wj["rho"] = density_to_json(w.rho_mle);
        windows.push_back(wj);
    }
    j["windows"] = windows;

    Json eb;
    eb["n_resamples"] = report.resampling.n_resamples;
    eb["n_failed"] = report.resampling.n_failed;
    eb["fidelity_mean"] = report.resampling.fidelities.at(0).mean;
    eb["fidelity_stddev"] = report.resampling.fidelities.at(0).stddev;
    eb["concurrence_stddev"] = report.resampling.concurrence.stddev;
    j["error_bars"] = eb;

    Json checks = Json::array();
    for (const auto& c : report.checks) {
        checks.push_back(Json{{"name", c.name},
                              {"value", c.value},
                              {"target_lo", c.lo},
                              {"target_hi", c.hi},
                              {"passed", c.passed}});
    }
    j["checks"] = checks;
    j["all_passed"] = report.all_passed;
    return j;
}

std::string scenario_report_to_markdown(const ScenarioReport& report) {
    std::ostringstream md;
    md.precision(4);
    md << "# Reference scenario report\n\n";
    md << "Source: S = " << report.scenario.config.cascade.fss_uev
       << " ueV, exciton lifetime = "
       << report.scenario.config.cascade.exciton_lifetime_ps
       << " ps, IRF = " << report.scenario.config.detector.irf_fwhm_ps
       << " ps FWHM, background fraction = "
       << report.scenario.config.cascade.background_fraction << ".\n\n";
    md << "Calibrated cross-dephasing time: " << report.dephasing_ps << " ps\n\n";
    md << "Phase oscillation period from S: " << report.scenario.period_ps
       << " ps; fitted (RR, Monte Carlo): " << report.fit_rr.param("period_ps")
       << " ps; DD/RR phase difference: " << report.phase_diff_deg << " deg\n\n";

    md << "| window | start (ps) | C (model) | C (MLE) | F(phi+) | F(phi-) | "
          "best phase (deg) | best F |\n";
    md << "|---|---|---|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < report.windows.size(); ++i) {
        const auto& w = report.windows[i];
        md << "| " << i + 1 << " | " << w.start_ps << " | " << w.concurrence_model
           << " | " << w.concurrence_mle << " | " << w.fidelity_phi_plus << " | "
           << w.fidelity_phi_minus << " | " << rad_to_deg(w.best_phase.theta)
           << " | " << w.best_phase.fidelity << " |\n";
    }
    md << "\nHV/HH time-integrated ratio: " << report.hv_hh_ratio << "\n\n";
    md << "Autocorrelation center-peak ratio: " << report.g2_center << "\n\n";
    md << "Fidelity std dev from " << report.resampling.n_resamples
       << " count resamples: " << report.resampling.fidelities.at(0).stddev
       << "\n\n";

    md << "| check | value | target | pass |\n|---|---|---|---|\n";
    for (const auto& c : report.checks) {
        md << "| " << c.name << " | " << c.value << " | [" << c.lo << ", " << c.hi
           << "] | " << (c.passed ? "yes" : "NO") << " |\n";
    }
    md << "\nOverall: " << (report.all_passed ? "all checks passed" : "CHECKS FAILED")
       << "\n";
    return md.str();
}

}  // namespace qdent
