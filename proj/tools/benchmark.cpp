// Benchmark of the OpenMP kernels against their serial references.
// Also verifies on every run that both produce identical output.

#include "qdent/coincidence.hpp"
#include "qdent/rng.hpp"
#include "qdent/serial_reference.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace qdent;

namespace {

double time_ms(const std::function<void()>& fn, int repeat) {
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < repeat; ++i) fn();
    auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(end - start).count() / repeat;
}

bool hist_equal(const CoincidenceHistogram& a, const CoincidenceHistogram& b) {
    if (a.counts.size() != b.counts.size()) return false;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        if (a.counts[i] != b.counts[i]) return false;
    }
    return true;
}

bool stream_equal(const TimeTagStream& a, const TimeTagStream& b) {
    if (a.events.size() != b.events.size()) return false;
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        if (a.events[i].t_ps != b.events[i].t_ps ||
            a.events[i].channel != b.events[i].channel)
            return false;
    }
    return true;
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-22s %10.2f ms %10.2f ms %8.2fx   %s\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms, equal ? "identical" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
    long long n_pulses = 2000000;
    int repeat = 3;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--pulses" && i + 1 < argc) n_pulses = std::atoll(argv[++i]);
        else if (arg == "--repeat" && i + 1 < argc) repeat = std::atoi(argv[++i]);
        else {
            std::fprintf(stderr, "usage: %s [--pulses N] [--repeat R]\n", argv[0]);
            return 2;
        }
    }

#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; parallel kernels run serially\n");
#endif
    std::printf("pulses: %lld, repeats per timing: %d\n\n", n_pulses, repeat);
    std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    CascadeParams params;
    params.fss_uev = 18.0;
    params.cross_dephasing_ps = 156.0;
    params.background_fraction = 0.08;
    DetectorModel det{35.0, 0.8, 100.0};
    auto dd = canonical_setting('D');
    auto rr = canonical_setting('R');
    Binning bins{16.0, -64.0, 600};

    {
        CoincidenceHistogram hp, hs;
        double tp = time_ms(
            [&] { hp = expected_histogram(params, det, dd, rr, 1e6, bins); }, repeat);
        double ts = time_ms(
            [&] { hs = serial_ref::expected_histogram(params, det, dd, rr, 1e6, bins); },
            repeat);
        report("expected_histogram", ts, tp, hist_equal(hp, hs));
    }

    TimeTagStream stream;
    {
        TimeTagStream sp, ss;
        double tp = time_ms(
            [&] { sp = sample_stream(params, det, dd, rr, 13158.0, n_pulses, 42); },
            repeat);
        double ts = time_ms(
            [&] {
                ss = serial_ref::sample_stream(params, det, dd, rr, 13158.0,
                                               n_pulses, 42);
            },
            repeat);
        report("sample_stream", ts, tp, stream_equal(sp, ss));
        stream = sp;
    }

    {
        CoincidenceHistogram hp, hs;
        double tp = time_ms([&] { hp = correlate(stream, bins); }, repeat);
        double ts = time_ms([&] { hs = serial_ref::correlate(stream, bins); }, repeat);
        report("correlate", ts, tp, hist_equal(hp, hs));
    }

    {
        TimeTagStream emitter = sample_single_emitter_stream(
            13158.0, n_pulses / 4, 2000.0, 0.05, 0.35, 200.0, 35.0, 7);
        std::vector<double> times = channel_times(emitter, Channel::X);
        Binning g2_bins{263.16, -6579.0, 50 * 6 + 25};
        CoincidenceHistogram hp, hs;
        double tp = time_ms(
            [&] { hp = g2_autocorrelation(times, 13158.0, g2_bins); }, repeat);
        double ts = time_ms(
            [&] { hs = serial_ref::g2_autocorrelation(times, 13158.0, g2_bins); },
            repeat);
        report("g2_autocorrelation", ts, tp, hist_equal(hp, hs));
    }

    return 0;
}
