#include "qdent/coincidence.hpp"

#include "sim_detail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qdent {

using detail::normal_cdf;

void DetectorModel::validate() const {
    if (!(irf_fwhm_ps >= 0.0)) throw std::invalid_argument("irf_fwhm_ps must be >= 0");
    if (!(efficiency > 0.0 && efficiency <= 1.0))
        throw std::invalid_argument("efficiency must be in (0, 1]");
    if (!(dark_rate_cps >= 0.0))
        throw std::invalid_argument("dark_rate_cps must be >= 0");
}

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
        // No IRF: integrate the delay density bin by bin.
#pragma omp parallel for schedule(static)
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

    // With IRF: counts_k = integral f(tau) * [Phi((hi-tau)/s) - Phi((lo-tau)/s)] dtau.
    // The CDF difference makes the bin sum telescope, so jitter moves counts
    // between bins without creating or destroying any.
    detail::ExpectedGrid grid = detail::make_anchored_grid(
        span_lo - 8.0 * sigma, span_hi + 8.0 * sigma, step);
    const int n_nodes = static_cast<int>(grid.tau.size());

    std::vector<double> fvals(n_nodes);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_nodes; ++i) {
        fvals[i] = grid.weight[i] *
                   detail::delay_density(params, kernels.joint, grid.tau[i]);
    }

#pragma omp parallel for schedule(static)
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

    // Blocked so the per-pulse scratch stays cache-resident; compaction in
    // pulse order keeps the event sequence identical to the serial path.
    const long long block = 1 << 16;
    std::vector<detail::PulseOutcome> outcomes(
        static_cast<std::size_t>(std::min(block, n_pulses)));
    for (long long start = 0; start < n_pulses; start += block) {
        const long long n = std::min(block, n_pulses - start);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) {
            long long pulse = start + i;
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(pulse)));
            outcomes[static_cast<std::size_t>(i)] = detail::simulate_pulse(
                params, detector, kernels, pulse * rep_period_ps, jitter_sigma, rng);
        }
        for (long long i = 0; i < n; ++i) {
            const auto& o = outcomes[static_cast<std::size_t>(i)];
            if (o.has_xx) stream.events.push_back({Channel::XX, o.t_xx});
            if (o.has_x) stream.events.push_back({Channel::X, o.t_x});
        }
    }
    detail::append_dark_counts(stream.events, Channel::XX, detector.dark_rate_cps,
                               stream.duration_ps, seed);
    detail::append_dark_counts(stream.events, Channel::X, detector.dark_rate_cps,
                               stream.duration_ps, seed);
    detail::finalize_stream(stream);
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
    const long long n_xx = static_cast<long long>(xx_times.size());

#pragma omp parallel
    {
        std::vector<double> local(binning.n_bins, 0.0);
#pragma omp for schedule(static)
        for (long long i = 0; i < n_xx; ++i) {
            double t0 = xx_times[static_cast<std::size_t>(i)];
            auto it = std::lower_bound(x_times.begin(), x_times.end(), t0 + span_lo);
            for (; it != x_times.end() && *it - t0 < span_hi; ++it) {
                int bin = static_cast<int>((*it - t0 - span_lo) / binning.bin_width_ps);
                if (bin >= 0 && bin < binning.n_bins) local[bin] += 1.0;
            }
        }
#pragma omp critical
        for (int b = 0; b < binning.n_bins; ++b) hist.counts[b] += local[b];
    }
    return hist;
}

std::vector<double> channel_times(const TimeTagStream& stream, Channel channel) {
    std::vector<double> out;
    for (const auto& e : stream.events) {
        if (e.channel == channel) out.push_back(e.t_ps);
    }
    return out;
}

namespace {

// Mean integrated counts over the side-peak windows [kT - T/2, kT + T/2)
// fully contained in the span, k != 0.
double side_peak_norm(const CoincidenceHistogram& hist, double rep_period_ps) {
    double span_lo = hist.bin_start_ps;
    double span_hi = hist.span_end_ps();
    double sum = 0.0;
    int n_windows = 0;
    for (int k = static_cast<int>(std::floor(span_lo / rep_period_ps)) - 1;
         k <= static_cast<int>(std::ceil(span_hi / rep_period_ps)) + 1; ++k) {
        if (k == 0) continue;
        double lo = k * rep_period_ps - 0.5 * rep_period_ps;
        double hi = k * rep_period_ps + 0.5 * rep_period_ps;
        if (lo < span_lo || hi > span_hi) continue;
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
    return sum / n_windows;
}

}  // namespace

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
    const long long n = static_cast<long long>(times.size());

#pragma omp parallel
    {
        std::vector<double> local(binning.n_bins, 0.0);
#pragma omp for schedule(static)
        for (long long i = 0; i < n; ++i) {
            double t0 = times[static_cast<std::size_t>(i)];
            auto it = std::lower_bound(times.begin(), times.end(), t0 + span_lo);
            for (; it != times.end() && *it - t0 < span_hi; ++it) {
                if (it - times.begin() == i) continue;  // no self-pairing
                int bin =
                    static_cast<int>((*it - t0 - span_lo) / binning.bin_width_ps);
                if (bin >= 0 && bin < binning.n_bins) local[bin] += 1.0;
            }
        }
#pragma omp critical
        for (int b = 0; b < binning.n_bins; ++b) hist.counts[b] += local[b];
    }

    double norm = side_peak_norm(hist, rep_period_ps);
    if (norm > 0.0) {
        for (double& c : hist.counts) c /= norm;
    }
    return hist;
}

CoincidenceHistogram g2_autocorrelation(const TimeTagStream& stream, Channel channel,
                                        double rep_period_ps, const Binning& binning) {
    return g2_autocorrelation(channel_times(stream, channel), rep_period_ps, binning);
}

double g2_center_peak_ratio(const CoincidenceHistogram& normalized_hist,
                            double rep_period_ps) {
    double sum = 0.0;
    for (std::size_t i = 0; i < normalized_hist.counts.size(); ++i) {
        double c = normalized_hist.bin_center(i);
        if (c >= -0.5 * rep_period_ps && c < 0.5 * rep_period_ps) {
            sum += normalized_hist.counts[i];
        }
    }
    return sum;
}

TimeTagStream sample_single_emitter_stream(double rep_period_ps, long long n_pulses,
                                           double lifetime_ps, double p_two_photon,
                                           double efficiency, double dark_rate_cps,
                                           double jitter_fwhm_ps, std::uint64_t seed) {
    if (!(rep_period_ps > 0.0) || n_pulses <= 0 || !(lifetime_ps > 0.0))
        throw std::invalid_argument("invalid emitter stream parameters");
    if (!(p_two_photon >= 0.0 && p_two_photon <= 1.0))
        throw std::invalid_argument("p_two_photon must be in [0, 1]");
    if (!(efficiency > 0.0 && efficiency <= 1.0))
        throw std::invalid_argument("efficiency must be in (0, 1]");
    if (!(jitter_fwhm_ps >= 0.0))
        throw std::invalid_argument("jitter_fwhm_ps must be >= 0");

    double jitter_sigma = sigma_from_fwhm(jitter_fwhm_ps);
    struct Emitted {
        double t[2];
        int n = 0;
    };

    TimeTagStream stream;
    stream.seed = seed;
    stream.duration_ps = n_pulses * rep_period_ps;

    const long long block = 1 << 16;
    std::vector<Emitted> out(static_cast<std::size_t>(std::min(block, n_pulses)));
    for (long long start = 0; start < n_pulses; start += block) {
        const long long n = std::min(block, n_pulses - start);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) {
            long long pulse = start + i;
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(pulse)));
            double u_multi = rng.uniform();
            int n_photons = u_multi < p_two_photon ? 2 : 1;
            Emitted& e = out[static_cast<std::size_t>(i)];
            e.n = 0;
            for (int p = 0; p < 2; ++p) {
                double delay = rng.exponential(lifetime_ps);
                double u_eff = rng.uniform();
                double jit = rng.normal(jitter_sigma);
                if (p < n_photons && u_eff <= efficiency) {
                    e.t[e.n++] = pulse * rep_period_ps + delay + jit;
                }
            }
        }
        for (long long i = 0; i < n; ++i) {
            const auto& e = out[static_cast<std::size_t>(i)];
            for (int p = 0; p < e.n; ++p) {
                stream.events.push_back({Channel::X, e.t[p]});
            }
        }
    }
    detail::append_dark_counts(stream.events, Channel::X, dark_rate_cps,
                               stream.duration_ps, seed);
    detail::finalize_stream(stream);
    return stream;
}

}  // namespace qdent
