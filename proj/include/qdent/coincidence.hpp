#pragma once

#include "qdent/cascade.hpp"
#include "qdent/histogram.hpp"
#include "qdent/polarization.hpp"

#include <cstdint>
#include <vector>

namespace qdent {

struct DetectorModel {
    double irf_fwhm_ps = 35.0;  // combined pair-measurement response
    double efficiency = 1.0;    // per arm, in (0, 1]
    double dark_rate_cps = 0.0;

    void validate() const;
};

enum class Channel : std::uint8_t { XX = 0, X = 1 };

struct TimeTag {
    Channel channel;
    double t_ps;
};

struct TimeTagStream {
    std::vector<TimeTag> events;  // sorted by time
    double duration_ps = 0.0;
    std::uint64_t seed = 0;
};

// Expected coincidence counts per bin for one analyzer-pair setting:
// pairs * eff^2 * integral over each bin of the IRF-convolved
// exponential-decay * projection-probability density, plus a flat
// accidental floor from the dark rate. Linear in pairs_emitted.
CoincidenceHistogram expected_histogram(const CascadeParams& params,
                                        const DetectorModel& detector,
                                        const AnalyzerSetting& setting_xx,
                                        const AnalyzerSetting& setting_x,
                                        double pairs_emitted,
                                        const Binning& binning);

// Monte Carlo time-tag stream: one cascade per pulse, analyzer acceptance
// from the joint polarization model (XX marginal first, then X conditioned
// on the XX outcome), efficiency thinning, per-photon jitter of
// irf_fwhm/sqrt2 so pair delays carry the full IRF, plus Poisson dark
// counts. Identical output for a fixed seed at any thread count.
TimeTagStream sample_stream(const CascadeParams& params,
                            const DetectorModel& detector,
                            const AnalyzerSetting& setting_xx,
                            const AnalyzerSetting& setting_x,
                            double rep_period_ps, long long n_pulses,
                            std::uint64_t seed);

// Histogram of t_X - t_XX over all XX-X pairs whose delay lies in the span.
CoincidenceHistogram correlate(const TimeTagStream& stream, const Binning& binning);

// Single-channel autocorrelation histogram over all ordered pairs,
// excluding self-pairing, normalized so the side peaks at nonzero
// multiples of rep_period integrate to 1 on average.
CoincidenceHistogram g2_autocorrelation(const std::vector<double>& times_ps,
                                        double rep_period_ps, const Binning& binning);
CoincidenceHistogram g2_autocorrelation(const TimeTagStream& stream, Channel channel,
                                        double rep_period_ps, const Binning& binning);

// Integrated counts of the normalized histogram in the rep-period window
// centered on zero delay; ~0 for a single-photon stream, ~1 for Poissonian.
double g2_center_peak_ratio(const CoincidenceHistogram& normalized_hist,
                            double rep_period_ps);

// Emitter test stream for autocorrelation studies: per pulse one photon
// with probability (1 - p_two_photon), two with p_two_photon, thinned by
// `efficiency`, jittered, plus dark counts. Channel label is X.
TimeTagStream sample_single_emitter_stream(double rep_period_ps, long long n_pulses,
                                           double lifetime_ps, double p_two_photon,
                                           double efficiency, double dark_rate_cps,
                                           double jitter_fwhm_ps, std::uint64_t seed);

std::vector<double> channel_times(const TimeTagStream& stream, Channel channel);

}  // namespace qdent
