#include "qdent/serial_reference.hpp"

#include "sim_detail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qdent::serial_ref {

using detail::normal_cdf;

CoincidenceHistogram expected_histogram(const CascadeParams& params,
                                        const DetectorModel& detector,
                                        const AnalyzerSetting& setting_xx,
                                        const AnalyzerSetting& setting_x,
                                        double pairs_emitted, const Binning& binning) {
    params.validate();
    detector.validate();
    binning.validate();
    if (!(pairs_emitted > 0.0))
        throw std::invalid_argument("pairs_emitted must be > 0");

    detail::PairKernels kernels(params, setting_xx, setting_x);
    double scale = pairs_emitted * detector.efficiency * detector.efficiency;
    double floor = detail::accidental_floor_per_bin(detector, kernels, pairs_emitted,
                                                    binning.bin_width_ps);

    CoincidenceHistogram hist;
    hist.bin_width_ps = binning.bin_width_ps;
    hist.bin_start_ps = binning.bin_start_ps;
    hist.counts.assign(binning.n_bins, 0.0);
    hist.setting_label = setting_xx.label + setting_x.label;

    double sigma = sigma_from_fwhm(detector.irf_fwhm_ps);
    double span_lo = binning.bin_start_ps;
    double span_hi = binning.span_end_ps();

    double step = detail::expected_step(binning, sigma);

    if (sigma == 0.0) {
        for (int k = 0; k < binning.n_bins; ++k) {
            double lo = span_lo + k * binning.bin_width_ps;
            double hi = lo + binning.bin_width_ps;
            if (hi <= 0.0) {
                hist.counts[k] = floor;
                continue;
            }
            detail::ExpectedGrid grid = detail::make_expected_grid(lo, hi, step);
            double acc = 0.0;
            for (std::size_t i = 0; i < grid.tau.size(); ++i) {
                acc += grid.weight[i] *
                       detail::delay_density(params, kernels.joint, grid.tau[i]);
            }
            hist.counts[k] = scale * acc + floor;
        }
        return hist;
    }

    detail::ExpectedGrid grid = detail::make_anchored_grid(
        span_lo - 8.0 * sigma, span_hi + 8.0 * sigma, step);
    const int n_nodes = static_cast<int>(grid.tau.size());

    std::vector<double> fvals(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        fvals[i] = grid.weight[i] *
                   detail::delay_density(params, kernels.joint, grid.tau[i]);
    }

    for (int k = 0; k < binning.n_bins; ++k) {
        double lo = span_lo + k * binning.bin_width_ps;
        double hi = lo + binning.bin_width_ps;
        double acc = 0.0;
        for (int i = 0; i < n_nodes; ++i) {
            if (fvals[i] == 0.0) continue;
            double t = grid.tau[i];
            acc += fvals[i] *
                   (normal_cdf((hi - t) / sigma) - normal_cdf((lo - t) / sigma));
        }
        hist.counts[k] = scale * acc + floor;
    }
    return hist;
}

TimeTagStream sample_stream(const CascadeParams& params, const DetectorModel& detector,
                            const AnalyzerSetting& setting_xx,
                            const AnalyzerSetting& setting_x, double rep_period_ps,
                            long long n_pulses, std::uint64_t seed) {
    params.validate();
    detector.validate();
    if (!(rep_period_ps > 0.0))
        throw std::invalid_argument("rep_period_ps must be > 0");
    if (n_pulses <= 0) throw std::invalid_argument("n_pulses must be > 0");

    detail::PairKernels kernels(params, setting_xx, setting_x);
    double jitter_sigma = sigma_from_fwhm(detector.irf_fwhm_ps) / std::sqrt(2.0);

    TimeTagStream stream;
    stream.seed = seed;
    stream.duration_ps = n_pulses * rep_period_ps;
    stream.events.reserve(static_cast<std::size_t>(n_pulses));
    for (long long i = 0; i < n_pulses; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        detail::PulseOutcome o = detail::simulate_pulse(
            params, detector, kernels, i * rep_period_ps, jitter_sigma, rng);
        if (o.has_xx) stream.events.push_back({Channel::XX, o.t_xx});
        if (o.has_x) stream.events.push_back({Channel::X, o.t_x});
    }
    detail::append_dark_counts(stream.events, Channel::XX, detector.dark_rate_cps,
                               stream.duration_ps, seed);
    detail::append_dark_counts(stream.events, Channel::X, detector.dark_rate_cps,
                               stream.duration_ps, seed);
    detail::finalize_stream_serial(stream);
    return stream;
}

CoincidenceHistogram correlate(const TimeTagStream& stream, const Binning& binning) {
    binning.validate();

    std::vector<double> xx_times = channel_times(stream, Channel::XX);
    std::vector<double> x_times = channel_times(stream, Channel::X);

    CoincidenceHistogram hist;
    hist.bin_width_ps = binning.bin_width_ps;
    hist.bin_start_ps = binning.bin_start_ps;
    hist.counts.assign(binning.n_bins, 0.0);

    double span_lo = binning.bin_start_ps;
    double span_hi = binning.span_end_ps();

    for (double t0 : xx_times) {
        auto it = std::lower_bound(x_times.begin(), x_times.end(), t0 + span_lo);
        for (; it != x_times.end() && *it - t0 < span_hi; ++it) {
            int bin = static_cast<int>((*it - t0 - span_lo) / binning.bin_width_ps);
            if (bin >= 0 && bin < binning.n_bins) hist.counts[bin] += 1.0;
        }
    }
    return hist;
}

CoincidenceHistogram g2_autocorrelation(const std::vector<double>& times_ps,
                                        double rep_period_ps, const Binning& binning) {
    binning.validate();
    if (!(rep_period_ps > 0.0))
        throw std::invalid_argument("rep_period_ps must be > 0");

    std::vector<double> times = times_ps;
    std::sort(times.begin(), times.end());

    CoincidenceHistogram hist;
    hist.bin_width_ps = binning.bin_width_ps;
    hist.bin_start_ps = binning.bin_start_ps;
    hist.counts.assign(binning.n_bins, 0.0);
    hist.setting_label = "g2";

    double span_lo = binning.bin_start_ps;
    double span_hi = binning.span_end_ps();

    for (std::size_t i = 0; i < times.size(); ++i) {
        double t0 = times[i];
        auto it = std::lower_bound(times.begin(), times.end(), t0 + span_lo);
        for (; it != times.end() && *it - t0 < span_hi; ++it) {
            if (static_cast<std::size_t>(it - times.begin()) == i) continue;
            int bin = static_cast<int>((*it - t0 - span_lo) / binning.bin_width_ps);
            if (bin >= 0 && bin < binning.n_bins) hist.counts[bin] += 1.0;
        }
    }

    // Same side-peak normalization as the parallel kernel.
    double span_end = hist.span_end_ps();
    double sum = 0.0;
    int n_windows = 0;
    for (int k = static_cast<int>(std::floor(hist.bin_start_ps / rep_period_ps)) - 1;
         k <= static_cast<int>(std::ceil(span_end / rep_period_ps)) + 1; ++k) {
        if (k == 0) continue;
        double lo = k * rep_period_ps - 0.5 * rep_period_ps;
        double hi = k * rep_period_ps + 0.5 * rep_period_ps;
        if (lo < hist.bin_start_ps || hi > span_end) continue;
        double s = 0.0;
        for (std::size_t i = 0; i < hist.counts.size(); ++i) {
            double c = hist.bin_center(i);
            if (c >= lo && c < hi) s += hist.counts[i];
        }
        sum += s;
        ++n_windows;
    }
    if (n_windows == 0) {
        throw std::invalid_argument(
            "g2 span must contain at least one full side-peak window");
    }
    double norm = sum / n_windows;
    if (norm > 0.0) {
        for (double& c : hist.counts) c /= norm;
    }
    return hist;
}

}  // namespace qdent::serial_ref
