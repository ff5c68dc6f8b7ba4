// qdent: simulation and analysis pipelines for cascade photon-pair
// experiments. Subcommands cover forward simulation, tomography, state
// metrics, line/oscillation fits, autocorrelation and the bundled
// reference scenario.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
// target or convergence failure (artifacts are still written).

#include "CLI11.hpp"

#include "qdent/io.hpp"
#include "qdent/metrics.hpp"
#include "qdent/rng.hpp"
#include "qdent/scenario.hpp"
#include "qdent/units.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace qdent;

namespace {

fs::path default_out_dir() {
    if (const char* env = std::getenv("QDENT_OUT_DIR")) return fs::path(env);
    return fs::path(".");
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir = out.empty() ? default_out_dir() : fs::path(out);
    fs::create_directories(dir);
    return dir;
}

Vec4c parse_reference(const std::string& spec) {
    if (spec == "phi+") return bell_phi_plus();
    if (spec == "phi-") return bell_phi_minus();
    if (spec == "psi+") return bell_psi_plus();
    if (spec == "psi-") return bell_psi_minus();
    if (spec.rfind("theta:", 0) == 0) {
        double deg = std::stod(spec.substr(6));
        return two_photon_state(deg_to_rad(deg));
    }
    throw std::invalid_argument(
        "unknown reference state '" + spec +
        "' (use phi+, phi-, psi+, psi-, or theta:<degrees>)");
}

Json metrics_json(const DensityMatrix& rho,
                  const std::vector<std::pair<std::string, Vec4c>>& refs) {
    Json j;
    Json fids = Json::object();
    for (const auto& [name, state] : refs) {
        fids[name] = fidelity_to_pure(rho, state);
    }
    j["fidelity"] = fids;
    j["concurrence"] = concurrence(rho);
    j["purity"] = purity(rho);
    PhaseReference best = best_phase_reference(rho);
    j["best_phase"] = {{"theta_deg", rad_to_deg(best.theta)},
                       {"fidelity", best.fidelity}};
    return j;
}

int cmd_simulate(const std::string& config_path, const std::string& settings_path,
                 bool standard16, const std::string& out, const std::string& mode) {
    RunConfig cfg = load_run_config(config_path);
    std::vector<SettingPair> pairs;
    if (standard16) {
        auto s = standard_settings();
        pairs.assign(s.begin(), s.end());
    } else {
        if (settings_path.empty()) {
            throw std::invalid_argument("need --settings FILE or --standard16");
        }
        pairs = load_setting_pairs(settings_path);
    }
    if (pairs.empty()) throw std::invalid_argument("settings list is empty");

    fs::path dir = prepare_out_dir(out);
    bool want_expected = mode == "expected" || mode == "both";
    bool want_sampled = mode == "sampled" || mode == "both";
    if (!want_expected && !want_sampled) {
        throw std::invalid_argument("mode must be expected, sampled or both");
    }

    Json files = Json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [sxx, sx] = pairs[i];
        std::string label = sxx.label + sx.label;
        if (label.empty()) label = "setting" + std::to_string(i);
        if (want_expected) {
            CoincidenceHistogram h = expected_histogram(
                cfg.cascade, cfg.detector, sxx, sx,
                static_cast<double>(cfg.n_pulses), cfg.binning);
            fs::path f = dir / ("sim_" + label + "_expected.csv");
            save_histogram(h, f);
            files.push_back(f.filename().string());
        }
        if (want_sampled) {
            TimeTagStream stream = sample_stream(
                cfg.cascade, cfg.detector, sxx, sx, cfg.rep_period_ps, cfg.n_pulses,
                mix_seed(cfg.seed, i));
            CoincidenceHistogram h = correlate(stream, cfg.binning);
            h.setting_label = label;
            fs::path f = dir / ("sim_" + label + "_sampled.csv");
            save_histogram(h, f);
            files.push_back(f.filename().string());
        }
    }

    Json manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = cfg.seed;
    manifest["mode"] = mode;
    Json labels = Json::array();
    for (const auto& [sxx, sx] : pairs) labels.push_back(sxx.label + sx.label);
    manifest["settings"] = labels;
    manifest["files"] = files;
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << files.size() << " histograms to " << dir.string()
              << "\n";
    return 0;
}

int cmd_tomo(const std::string& counts_path, const std::string& out,
             int n_resamples, std::uint64_t seed,
             const std::vector<std::string>& ref_specs) {
    TomographyInput input = load_tomography(counts_path);
    fs::path dir = prepare_out_dir(out);

    MleOptions options;
    options.seed = seed;
    auto [rho, report] = mle_reconstruct(input, options);

    std::vector<std::pair<std::string, Vec4c>> refs;
    for (const auto& spec : ref_specs) refs.emplace_back(spec, parse_reference(spec));
    if (refs.empty()) {
        refs.emplace_back("phi+", bell_phi_plus());
        refs.emplace_back("phi-", bell_phi_minus());
        refs.emplace_back("theta:90", two_photon_state(kPi / 2.0));
    }

    write_text_file(dir / "rho.json", density_to_json(rho).dump(2) + "\n");

    Json j;
    j["fit_report"] = {{"converged", report.converged},
                       {"iterations", report.iterations},
                       {"nll", report.nll},
                       {"grad_norm", report.grad_norm},
                       {"n_tot", report.n_tot},
                       {"best_start", report.best_start}};
    j["metrics"] = metrics_json(rho, refs);

    if (n_resamples > 0) {
        std::vector<NamedReference> named;
        for (const auto& [name, state] : refs) named.push_back({name, state});
        ErrorBarReport eb = error_bars(input, n_resamples, mix_seed(seed, 0xEB), named);
        Json ej;
        ej["n_resamples"] = eb.n_resamples;
        ej["n_failed"] = eb.n_failed;
        Json fj = Json::object();
        for (const auto& f : eb.fidelities) {
            fj[f.name] = {{"mean", f.mean}, {"stddev", f.stddev}};
        }
        ej["fidelity"] = fj;
        ej["concurrence"] = {{"mean", eb.concurrence.mean},
                             {"stddev", eb.concurrence.stddev}};
        ej["purity"] = {{"mean", eb.purity.mean}, {"stddev", eb.purity.stddev}};
        j["error_bars"] = ej;
    }
    write_text_file(dir / "report.json", j.dump(2) + "\n");

    std::cout << "concurrence " << j["metrics"]["concurrence"].get<double>()
              << ", purity " << j["metrics"]["purity"].get<double>()
              << ", best phase "
              << j["metrics"]["best_phase"]["theta_deg"].get<double>() << " deg (F "
              << j["metrics"]["best_phase"]["fidelity"].get<double>() << ")\n";
    return report.converged ? 0 : 3;
}

int cmd_metrics(const std::string& rho_path, const std::string& out,
                const std::vector<std::string>& ref_specs) {
    DensityMatrix rho = load_density(rho_path);
    if (!is_valid_density(rho, 1e-6)) {
        throw std::invalid_argument("input matrix is not a valid density matrix");
    }
    std::vector<std::pair<std::string, Vec4c>> refs;
    for (const auto& spec : ref_specs) refs.emplace_back(spec, parse_reference(spec));
    if (refs.empty()) {
        refs.emplace_back("phi+", bell_phi_plus());
        refs.emplace_back("phi-", bell_phi_minus());
    }
    Json j = metrics_json(rho, refs);
    std::cout << j.dump(2) << "\n";
    if (!out.empty()) {
        fs::path dir = prepare_out_dir(out);
        write_text_file(dir / "metrics.json", j.dump(2) + "\n");
    }
    return 0;
}

Spectrum load_spectrum_csv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty spectrum file");
    Spectrum s;
    if (line == "wavelength_nm,intensity") {
        s.axis = Spectrum::Axis::wavelength_nm;
    } else if (line == "energy_ueV,intensity") {
        s.axis = Spectrum::Axis::energy_uev;
    } else {
        throw std::invalid_argument(
            "spectrum CSV header must be 'wavelength_nm,intensity' or "
            "'energy_ueV,intensity'");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("spectrum rows need 2 fields");
        s.x.push_back(std::stod(line.substr(0, comma)));
        s.intensity.push_back(std::stod(line.substr(comma + 1)));
    }
    return s;
}

std::vector<std::pair<double, double>> load_angle_series_csv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "angle_deg,energy_ueV") {
        throw std::invalid_argument(
            "angle series CSV header must be 'angle_deg,energy_ueV'");
    }
    std::vector<std::pair<double, double>> pts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("angle series rows need 2 fields");
        pts.emplace_back(deg_to_rad(std::stod(line.substr(0, comma))),
                         std::stod(line.substr(comma + 1)));
    }
    return pts;
}

int write_fit(const FitResult& fit, const std::string& out,
              const std::string& filename, const Json& extra = {}) {
    Json j = fit_result_to_json(fit);
    if (!extra.empty()) j["derived"] = extra;
    std::cout << j.dump(2) << "\n";
    if (!out.empty()) {
        fs::path dir = prepare_out_dir(out);
        write_text_file(dir / filename, j.dump(2) + "\n");
    }
    return fit.converged ? 0 : 3;
}

int cmd_fit_line(const std::string& data_path, const std::string& out) {
    Spectrum s = load_spectrum_csv(data_path);
    FitResult fit = fit_lorentzian(s);
    Json derived;
    if (s.axis == Spectrum::Axis::wavelength_nm && fit.converged) {
        double center_nm = wavelength_nm_from_energy_uev(fit.param("center_uev"));
        derived["center_nm"] = center_nm;
        derived["fwhm_nm"] =
            fit.param("fwhm_uev") * center_nm * center_nm / (kEvNm * 1e6);
    }
    return write_fit(fit, out, "fit_line.json", derived);
}

int cmd_fit_fss(const std::string& data_path, const std::string& pair_path,
                bool with_qwp, const std::string& out) {
    auto series = load_angle_series_csv(data_path);
    FitResult fit = pair_path.empty()
                        ? fit_fss_oscillation(series, with_qwp)
                        : fit_fss_oscillation_pair(series,
                                                   load_angle_series_csv(pair_path));
    return write_fit(fit, out, "fit_fss.json");
}

int cmd_fit_osc(const std::string& data_path, const std::string& out,
                std::optional<double> period_guess) {
    CoincidenceHistogram h = load_histogram(data_path);
    FitResult fit = fit_damped_cosine(h, period_guess);
    return write_fit(fit, out, "fit_osc.json");
}

int cmd_g2(const std::string& stream_path, double rep_period, double bin_width,
           int n_periods, const std::string& out) {
    TimeTagStream stream = load_stream(stream_path);
    if (stream.events.empty()) throw std::invalid_argument("stream file is empty");
    std::vector<double> times;
    for (const auto& e : stream.events) times.push_back(e.t_ps);

    int bins_per_period = std::max(4, static_cast<int>(rep_period / bin_width));
    bin_width = rep_period / bins_per_period;
    Binning bins{bin_width, -0.5 * rep_period,
                 bins_per_period * n_periods + bins_per_period / 2};

    CoincidenceHistogram hist = g2_autocorrelation(times, rep_period, bins);
    double ratio = g2_center_peak_ratio(hist, rep_period);

    fs::path dir = prepare_out_dir(out);
    save_histogram(hist, dir / "g2.csv");
    Json j;
    j["center_peak_ratio"] = ratio;
    j["rep_period_ps"] = rep_period;
    write_text_file(dir / "g2.json", j.dump(2) + "\n");
    std::cout << "center peak ratio " << ratio << "\n";
    return 0;
}

int cmd_reproduce(const std::string& out, std::uint64_t seed) {
    fs::path dir = prepare_out_dir(out);
    ScenarioReport report = run_reference_scenario(seed);

    save_histogram(report.hist_dd_expected, dir / "dd_expected.csv");
    save_histogram(report.hist_rr_expected, dir / "rr_expected.csv");
    save_histogram(report.hist_dd_sampled, dir / "dd_sampled.csv");
    save_histogram(report.hist_rr_sampled, dir / "rr_sampled.csv");
    save_histogram(report.g2_hist, dir / "g2.csv");
    for (std::size_t w = 0; w < report.windows.size(); ++w) {
        std::string tag = "window" + std::to_string(w + 1);
        write_text_file(dir / (tag + "_rho.json"),
                        density_to_json(report.windows[w].rho_mle).dump(2) + "\n");
        write_text_file(dir / (tag + "_counts.csv"),
                        tomography_to_csv(report.windows[w].counts));
    }
    write_text_file(dir / "report.json", scenario_report_to_json(report).dump(2) + "\n");
    write_text_file(dir / "report.md", scenario_report_to_markdown(report));

    std::cout << scenario_report_to_markdown(report);
    return report.all_passed ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cascade photon-pair simulation and analysis toolkit"};
    app.require_subcommand(1);

    // simulate
    std::string config_path, settings_path, out_dir, mode = "expected";
    bool standard16 = false;
    auto* sim = app.add_subcommand("simulate",
                                   "per-setting coincidence histograms from a config");
    sim->add_option("--config", config_path, "run config file")->required();
    sim->add_option("--settings", settings_path, "JSON list of analyzer pairs");
    sim->add_flag("--standard16", standard16, "use the canonical 16 projections");
    sim->add_option("--out", out_dir, "output directory");
    sim->add_option("--mode", mode, "expected | sampled | both");

    // tomo
    std::string counts_path, tomo_out;
    int resamples = 0;
    std::uint64_t tomo_seed = 1;
    std::vector<std::string> tomo_refs;
    auto* tomo = app.add_subcommand("tomo",
                                    "maximum-likelihood state from 16 counts");
    tomo->add_option("--counts", counts_path, "CSV label_xx,label_x,counts")
        ->required();
    tomo->add_option("--out", tomo_out, "output directory");
    tomo->add_option("--error-bars", resamples, "number of count resamples");
    tomo->add_option("--seed", tomo_seed, "resampling / restart seed");
    tomo->add_option("--ref", tomo_refs, "reference states for fidelities");

    // metrics
    std::string rho_path, metrics_out;
    std::vector<std::string> metric_refs;
    auto* met = app.add_subcommand("metrics", "entanglement metrics of a stored rho");
    met->add_option("--rho", rho_path, "density matrix JSON")->required();
    met->add_option("--out", metrics_out, "output directory");
    met->add_option("--ref", metric_refs, "reference states for fidelities");

    // fits
    std::string fit_data, fit_out, fss_pair;
    bool with_qwp = false;
    double period_guess = 0.0;
    auto* fline = app.add_subcommand("fit-line", "Lorentzian line fit");
    fline->add_option("--data", fit_data, "spectrum CSV")->required();
    fline->add_option("--out", fit_out, "output directory");

    auto* ffss = app.add_subcommand("fit-fss",
                                    "line-center oscillation vs HWP angle");
    ffss->add_option("--data", fit_data, "angle series CSV")->required();
    ffss->add_option("--pair", fss_pair, "second series for a shared-amplitude fit");
    ffss->add_flag("--with-qwp", with_qwp, "series taken with the conversion plate");
    ffss->add_option("--out", fit_out, "output directory");

    auto* fosc = app.add_subcommand("fit-osc", "damped cosine fit of a histogram");
    fosc->add_option("--data", fit_data, "histogram CSV")->required();
    fosc->add_option("--period-guess", period_guess, "initial period in ps");
    fosc->add_option("--out", fit_out, "output directory");

    // g2
    std::string stream_path, g2_out;
    double rep_period = 13158.0, g2_bin = 250.0;
    int g2_periods = 5;
    auto* g2 = app.add_subcommand("g2", "pulsed autocorrelation of a time-tag stream");
    g2->add_option("--stream", stream_path, "CSV channel,time_ps")->required();
    g2->add_option("--rep-period", rep_period, "pulse period in ps");
    g2->add_option("--bin-width", g2_bin, "histogram bin width in ps");
    g2->add_option("--periods", g2_periods, "side peaks to cover");
    g2->add_option("--out", g2_out, "output directory");

    // reproduce-paper
    std::string rep_out;
    std::uint64_t rep_seed = 1;
    auto* rep = app.add_subcommand(
        "reproduce-paper", "run the bundled reference scenario and check targets");
    rep->add_option("--out", rep_out, "output directory");
    rep->add_option("--seed", rep_seed, "simulation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) {
            return cmd_simulate(config_path, settings_path, standard16, out_dir, mode);
        }
        if (tomo->parsed()) {
            return cmd_tomo(counts_path, tomo_out, resamples, tomo_seed, tomo_refs);
        }
        if (met->parsed()) return cmd_metrics(rho_path, metrics_out, metric_refs);
        if (fline->parsed()) return cmd_fit_line(fit_data, fit_out);
        if (ffss->parsed()) return cmd_fit_fss(fit_data, fss_pair, with_qwp, fit_out);
        if (fosc->parsed()) {
            std::optional<double> guess;
            if (period_guess > 0.0) guess = period_guess;
            return cmd_fit_osc(fit_data, fit_out, guess);
        }
        if (g2->parsed()) {
            return cmd_g2(stream_path, rep_period, g2_bin, g2_periods, g2_out);
        }
        if (rep->parsed()) return cmd_reproduce(rep_out, rep_seed);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
