#pragma once

// Plain-loop reference versions of the OpenMP kernels. They share the
// per-pulse and quadrature building blocks with the parallel drivers and
// must produce identical output; tests and the benchmark compare the two.

#include "qdent/coincidence.hpp"

namespace qdent::serial_ref {

CoincidenceHistogram expected_histogram(const CascadeParams& params,
                                        const DetectorModel& detector,
                                        const AnalyzerSetting& setting_xx,
                                        const AnalyzerSetting& setting_x,
                                        double pairs_emitted, const Binning& binning);

TimeTagStream sample_stream(const CascadeParams& params,
                            const DetectorModel& detector,
                            const AnalyzerSetting& setting_xx,
                            const AnalyzerSetting& setting_x, double rep_period_ps,
                            long long n_pulses, std::uint64_t seed);

CoincidenceHistogram correlate(const TimeTagStream& stream, const Binning& binning);

CoincidenceHistogram g2_autocorrelation(const std::vector<double>& times_ps,
                                        double rep_period_ps, const Binning& binning);

}  // namespace qdent::serial_ref
