#include "qdent/io.hpp"

#include "qdent/units.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qdent {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, sep)) out.push_back(field);
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (trim(s.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("cannot parse number for " + what + ": '" + s + "'");
}

long long parse_ll(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (trim(s.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("cannot parse integer for " + what + ": '" + s + "'");
}

}  // namespace

void RunConfig::validate() const {
    cascade.validate();
    detector.validate();
    binning.validate();
    if (!(rep_period_ps > 0.0))
        throw std::invalid_argument("rep_period_ps must be > 0");
    if (n_pulses <= 0) throw std::invalid_argument("n_pulses must be > 0");
    for (const auto& [start, width] : windows_ps) {
        if (!(width > 0.0) || !(start >= 0.0))
            throw std::invalid_argument("windows_ps entries must be start>=0, width>0");
    }
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        " is not 'key = value'");
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));

        if (key == "fss_ueV") cfg.cascade.fss_uev = parse_double(value, key);
        else if (key == "exciton_lifetime_ps")
            cfg.cascade.exciton_lifetime_ps = parse_double(value, key);
        else if (key == "biexciton_lifetime_ps")
            cfg.cascade.biexciton_lifetime_ps = parse_double(value, key);
        else if (key == "cross_dephasing_ps")
            cfg.cascade.cross_dephasing_ps = parse_double(value, key);
        else if (key == "background_fraction")
            cfg.cascade.background_fraction = parse_double(value, key);
        else if (key == "ellipticity_delta_rad")
            cfg.cascade.ellipticity_delta = parse_double(value, key);
        else if (key == "qwp1_angle_rad")
            cfg.cascade.qwp1_angle = parse_double(value, key);
        else if (key == "phase_offset_rad")
            cfg.cascade.phase_offset = parse_double(value, key);
        else if (key == "irf_fwhm_ps")
            cfg.detector.irf_fwhm_ps = parse_double(value, key);
        else if (key == "efficiency")
            cfg.detector.efficiency = parse_double(value, key);
        else if (key == "dark_rate_cps")
            cfg.detector.dark_rate_cps = parse_double(value, key);
        else if (key == "rep_period_ps")
            cfg.rep_period_ps = parse_double(value, key);
        else if (key == "n_pulses")
            cfg.n_pulses = parse_ll(value, key);
        else if (key == "seed")
            cfg.seed = static_cast<std::uint64_t>(parse_ll(value, key));
        else if (key == "bin_width_ps")
            cfg.binning.bin_width_ps = parse_double(value, key);
        else if (key == "bin_start_ps")
            cfg.binning.bin_start_ps = parse_double(value, key);
        else if (key == "n_bins")
            cfg.binning.n_bins = static_cast<int>(parse_ll(value, key));
        else if (key == "windows_ps") {
            cfg.windows_ps.clear();
            for (const std::string& item : split(value, ',')) {
                auto parts = split(trim(item), ':');
                if (parts.size() != 2) {
                    throw std::invalid_argument(
                        "windows_ps entries must be start:width");
                }
                cfg.windows_ps.emplace_back(parse_double(trim(parts[0]), key),
                                            parse_double(trim(parts[1]), key));
            }
        } else {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_text_file(path));
}

std::string format_run_config(const RunConfig& config) {
    std::ostringstream out;
    out.precision(17);
    out << "fss_ueV = " << config.cascade.fss_uev << "\n";
    out << "exciton_lifetime_ps = " << config.cascade.exciton_lifetime_ps << "\n";
    out << "biexciton_lifetime_ps = " << config.cascade.biexciton_lifetime_ps << "\n";
    out << "cross_dephasing_ps = " << config.cascade.cross_dephasing_ps << "\n";
    out << "background_fraction = " << config.cascade.background_fraction << "\n";
    out << "ellipticity_delta_rad = " << config.cascade.ellipticity_delta << "\n";
    out << "qwp1_angle_rad = " << config.cascade.qwp1_angle << "\n";
    out << "phase_offset_rad = " << config.cascade.phase_offset << "\n";
    out << "irf_fwhm_ps = " << config.detector.irf_fwhm_ps << "\n";
    out << "efficiency = " << config.detector.efficiency << "\n";
    out << "dark_rate_cps = " << config.detector.dark_rate_cps << "\n";
    out << "rep_period_ps = " << config.rep_period_ps << "\n";
    out << "n_pulses = " << config.n_pulses << "\n";
    out << "seed = " << config.seed << "\n";
    out << "bin_width_ps = " << config.binning.bin_width_ps << "\n";
    out << "bin_start_ps = " << config.binning.bin_start_ps << "\n";
    out << "n_bins = " << config.binning.n_bins << "\n";
    if (!config.windows_ps.empty()) {
        out << "windows_ps = ";
        for (std::size_t i = 0; i < config.windows_ps.size(); ++i) {
            if (i) out << ", ";
            out << config.windows_ps[i].first << ":" << config.windows_ps[i].second;
        }
        out << "\n";
    }
    return out.str();
}

std::uint64_t config_hash(const RunConfig& config) {
    // FNV-1a over the canonical text.
    std::string text = format_run_config(config);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Json analyzer_setting_to_json(const AnalyzerSetting& setting) {
    Json j;
    j["label"] = setting.label;
    if (setting.qwp_angle) {
        j["qwp_deg"] = rad_to_deg(*setting.qwp_angle);
    } else {
        j["qwp_deg"] = nullptr;
    }
    j["hwp_deg"] = rad_to_deg(setting.hwp_angle);
    j["pol_deg"] = rad_to_deg(setting.pol_axis);
    return j;
}

AnalyzerSetting analyzer_setting_from_json(const Json& j) {
    AnalyzerSetting s;
    s.label = j.value("label", std::string{});
    if (j.contains("qwp_deg") && !j["qwp_deg"].is_null()) {
        s.qwp_angle = deg_to_rad(j["qwp_deg"].get<double>());
    }
    s.hwp_angle = deg_to_rad(j.at("hwp_deg").get<double>());
    s.pol_axis = deg_to_rad(j.at("pol_deg").get<double>());
    return s;
}

Json setting_pairs_to_json(const std::vector<SettingPair>& pairs) {
    Json arr = Json::array();
    for (const auto& [xx, x] : pairs) {
        Json j;
        j["xx"] = analyzer_setting_to_json(xx);
        j["x"] = analyzer_setting_to_json(x);
        arr.push_back(j);
    }
    return arr;
}

std::vector<SettingPair> setting_pairs_from_json(const Json& j) {
    if (!j.is_array()) throw std::invalid_argument("settings file must be a JSON array");
    std::vector<SettingPair> out;
    for (const auto& item : j) {
        out.emplace_back(analyzer_setting_from_json(item.at("xx")),
                         analyzer_setting_from_json(item.at("x")));
    }
    return out;
}

std::vector<SettingPair> load_setting_pairs(const std::filesystem::path& path) {
    return setting_pairs_from_json(Json::parse(read_text_file(path)));
}

Json density_to_json(const DensityMatrix& rho) {
    Json re = Json::array(), im = Json::array();
    for (int i = 0; i < 4; ++i) {
        Json re_row = Json::array(), im_row = Json::array();
        for (int k = 0; k < 4; ++k) {
            re_row.push_back(rho(i, k).real());
            im_row.push_back(rho(i, k).imag());
        }
        re.push_back(re_row);
        im.push_back(im_row);
    }
    return Json{{"re", re}, {"im", im}};
}

DensityMatrix density_from_json(const Json& j) {
    DensityMatrix rho;
    const Json& re = j.at("re");
    const Json& im = j.at("im");
    if (re.size() != 4 || im.size() != 4)
        throw std::invalid_argument("density matrix JSON must be 4x4");
    for (int i = 0; i < 4; ++i) {
        if (re[i].size() != 4 || im[i].size() != 4)
            throw std::invalid_argument("density matrix JSON must be 4x4");
        for (int k = 0; k < 4; ++k) {
            rho(i, k) = Complex(re[i][k].get<double>(), im[i][k].get<double>());
        }
    }
    return rho;
}

DensityMatrix load_density(const std::filesystem::path& path) {
    return density_from_json(Json::parse(read_text_file(path)));
}

std::string histogram_to_csv(const CoincidenceHistogram& hist) {
    std::ostringstream out;
    out.precision(17);
    out << "bin_start_ps,counts\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        out << hist.bin_start_ps + static_cast<double>(i) * hist.bin_width_ps << ","
            << hist.counts[i] << "\n";
    }
    return out.str();
}

CoincidenceHistogram histogram_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "bin_start_ps,counts") {
        throw std::invalid_argument("histogram CSV must start with 'bin_start_ps,counts'");
    }
    std::vector<double> starts, counts;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 2)
            throw std::invalid_argument("histogram CSV rows need 2 fields");
        starts.push_back(parse_double(fields[0], "bin_start_ps"));
        counts.push_back(parse_double(fields[1], "counts"));
    }
    if (starts.size() < 2)
        throw std::invalid_argument("histogram CSV needs at least 2 bins");

    CoincidenceHistogram hist;
    hist.bin_start_ps = starts.front();
    hist.bin_width_ps = starts[1] - starts[0];
    if (!(hist.bin_width_ps > 0.0))
        throw std::invalid_argument("histogram bins must be increasing");
    hist.counts = counts;
    return hist;
}

void save_histogram(const CoincidenceHistogram& hist,
                    const std::filesystem::path& path) {
    write_text_file(path, histogram_to_csv(hist));
}

CoincidenceHistogram load_histogram(const std::filesystem::path& path) {
    return histogram_from_csv(read_text_file(path));
}

std::string stream_to_csv(const TimeTagStream& stream) {
    std::ostringstream out;
    out.precision(17);
    out << "channel,time_ps\n";
    for (const auto& e : stream.events) {
        out << (e.channel == Channel::XX ? "XX" : "X") << "," << e.t_ps << "\n";
    }
    return out.str();
}

TimeTagStream stream_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "channel,time_ps") {
        throw std::invalid_argument("stream CSV must start with 'channel,time_ps'");
    }
    TimeTagStream stream;
    double last = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 2)
            throw std::invalid_argument("stream CSV rows need 2 fields");
        std::string ch = trim(fields[0]);
        Channel channel;
        if (ch == "XX") channel = Channel::XX;
        else if (ch == "X") channel = Channel::X;
        else throw std::invalid_argument("unknown channel '" + ch + "'");
        double t = parse_double(fields[1], "time_ps");
        if (t < last)
            throw std::invalid_argument("stream times must be non-decreasing");
        last = t;
        stream.events.push_back({channel, t});
    }
    stream.duration_ps = stream.events.empty() ? 0.0 : stream.events.back().t_ps;
    return stream;
}

TimeTagStream load_stream(const std::filesystem::path& path) {
    return stream_from_csv(read_text_file(path));
}

std::string tomography_to_csv(const TomographyInput& input) {
    std::ostringstream out;
    out << "label_xx,label_x,counts\n";
    for (const auto& r : input.records) {
        out << r.setting_xx.label << "," << r.setting_x.label << "," << r.counts
            << "\n";
    }
    return out.str();
}

TomographyInput tomography_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "label_xx,label_x,counts") {
        throw std::invalid_argument(
            "tomography CSV must start with 'label_xx,label_x,counts'");
    }
    std::vector<TomographyRecord> records;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 3)
            throw std::invalid_argument("tomography CSV rows need 3 fields");
        std::string lxx = trim(fields[0]), lx = trim(fields[1]);
        if (lxx.size() != 1 || lx.size() != 1)
            throw std::invalid_argument("tomography labels must be single letters");
        TomographyRecord rec;
        rec.setting_xx = canonical_setting(lxx[0]);
        rec.setting_x = canonical_setting(lx[0]);
        rec.counts = parse_ll(fields[2], "counts");
        records.push_back(rec);
    }
    return TomographyInput::make(records);
}

TomographyInput load_tomography(const std::filesystem::path& path) {
    return tomography_from_csv(read_text_file(path));
}

Json fit_result_to_json(const FitResult& fit) {
    Json params = Json::object(), errs = Json::object();
    for (std::size_t i = 0; i < fit.names.size(); ++i) {
        params[fit.names[i]] = fit.params(static_cast<Eigen::Index>(i));
        if (fit.stderrs.size() == fit.params.size()) {
            errs[fit.names[i]] = fit.stderrs(static_cast<Eigen::Index>(i));
        }
    }
    Json j;
    j["params"] = params;
    if (!errs.empty()) j["stderr"] = errs;
    j["residual_norm"] = fit.residual_norm;
    j["converged"] = fit.converged;
    j["rank_deficient"] = fit.rank_deficient;
    j["n_iter"] = fit.n_iter;
    if (!fit.note.empty()) j["note"] = fit.note;
    return j;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write file: " + path.string());
    out << text;
}

}  // namespace qdent
