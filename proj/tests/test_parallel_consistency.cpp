#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// The OpenMP kernels must reproduce the serial reference bit for bit:
// per-pulse RNG streams make sampling order-free and histogram merges only
// add exact integer-valued doubles.

#include "qdent/coincidence.hpp"
#include "qdent/serial_reference.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace qdent;

namespace {

CascadeParams params() {
    CascadeParams p;
    p.fss_uev = 18.0;
    p.cross_dephasing_ps = 156.0;
    p.background_fraction = 0.08;
    return p;
}

void check_equal(const CoincidenceHistogram& a, const CoincidenceHistogram& b) {
    REQUIRE(a.counts.size() == b.counts.size());
    CHECK(a.bin_width_ps == b.bin_width_ps);
    CHECK(a.bin_start_ps == b.bin_start_ps);
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        CHECK(a.counts[i] == b.counts[i]);
    }
}

}  // namespace

TEST_CASE("expected histograms agree exactly with the serial reference") {
#ifdef _OPENMP
    INFO("threads: ", omp_get_max_threads());
#endif
    auto dd = canonical_setting('D');
    auto rl = canonical_setting('L');
    for (double fwhm : {0.0, 35.0}) {
        DetectorModel det{fwhm, 0.9, 120.0};
        Binning bins{16.0, -64.0, 200};
        check_equal(expected_histogram(params(), det, dd, rl, 5e5, bins),
                    serial_ref::expected_histogram(params(), det, dd, rl, 5e5, bins));
    }
}

TEST_CASE("sampled streams agree exactly with the serial reference") {
    DetectorModel det{35.0, 0.75, 300.0};
    auto rr = canonical_setting('R');
    TimeTagStream par = sample_stream(params(), det, rr, rr, 13158.0, 60000, 31337);
    TimeTagStream ser =
        serial_ref::sample_stream(params(), det, rr, rr, 13158.0, 60000, 31337);
    REQUIRE(par.events.size() == ser.events.size());
    for (std::size_t i = 0; i < par.events.size(); ++i) {
        CHECK(par.events[i].t_ps == ser.events[i].t_ps);
        CHECK(par.events[i].channel == ser.events[i].channel);
    }
}

TEST_CASE("correlation histograms agree exactly with the serial reference") {
    DetectorModel det{35.0, 1.0, 100.0};
    auto dd = canonical_setting('D');
    TimeTagStream stream = sample_stream(params(), det, dd, dd, 13158.0, 60000, 5);
    Binning bins{16.0, -100.0, 120};
    check_equal(correlate(stream, bins), serial_ref::correlate(stream, bins));
}

TEST_CASE("autocorrelation histograms agree exactly with the serial reference") {
    TimeTagStream stream = sample_single_emitter_stream(
        1000.0, 40000, 250.0, 0.2, 0.7, 500.0, 35.0, 8);
    std::vector<double> times = channel_times(stream, Channel::X);
    Binning bins{25.0, -500.0, 200};
    check_equal(g2_autocorrelation(times, 1000.0, bins),
                serial_ref::g2_autocorrelation(times, 1000.0, bins));
}
