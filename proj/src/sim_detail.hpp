#pragma once

// Internal pieces shared by the OpenMP kernels and their serial reference
// twins. Both drivers must stay observationally identical: every random
// draw happens in a fixed per-pulse order and accumulation is exact
// (integer-valued doubles), so thread count never changes a result.

#include "qdent/cascade.hpp"
#include "qdent/coincidence.hpp"
#include "qdent/rng.hpp"
#include "qdent/units.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#if defined(_OPENMP) && defined(__GLIBCXX__)
#include <parallel/algorithm>
#endif

namespace qdent::detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct PulseOutcome {
    double t_xx = 0.0;
    double t_x = 0.0;
    bool has_xx = false;
    bool has_x = false;
};

struct PairKernels {
    ProjectionKernel joint;      // P_xx (x) P_x
    ProjectionKernel xx_single;  // P_xx (x) I
    ProjectionKernel x_single;   // I (x) P_x

    PairKernels(const CascadeParams& params, const AnalyzerSetting& setting_xx,
                const AnalyzerSetting& setting_x)
        : joint(params, two_photon_projector(analyzer_projection_state(setting_xx),
                                             analyzer_projection_state(setting_x))),
          xx_single(params, make_single(setting_xx, true)),
          x_single(params, make_single(setting_x, false)) {}

  private:
    static Mat4c make_single(const AnalyzerSetting& s, bool first_arm) {
        Vec2c v = analyzer_projection_state(s).amp;
        Mat2c p = v * v.adjoint();
        return first_arm ? kron(p, Mat2c::Identity()) : kron(Mat2c::Identity(), p);
    }
};

// One excitation cycle. Draw order is fixed and unconditional so the
// outcome depends only on (seed, pulse_index).
inline PulseOutcome simulate_pulse(const CascadeParams& params,
                                   const DetectorModel& det, const PairKernels& k,
                                   double pulse_t, double jitter_sigma_ps, Rng& rng) {
    double dt_xx = rng.exponential(params.biexciton_lifetime_ps);
    double tau = rng.exponential(params.exciton_lifetime_ps);
    double u_xx = rng.uniform();
    double u_x = rng.uniform();
    double e_xx = rng.uniform();
    double e_x = rng.uniform();
    double j_xx = rng.normal(jitter_sigma_ps);
    double j_x = rng.normal(jitter_sigma_ps);

    double p_xx = k.xx_single.prob(tau);
    double p_x = k.x_single.prob(tau);
    double p_joint = std::min(k.joint.prob(tau), std::min(p_xx, p_x));

    bool xx_pass = u_xx < p_xx;
    double p_x_cond;
    if (xx_pass) {
        p_x_cond = p_xx > 0.0 ? p_joint / p_xx : 0.0;
    } else {
        p_x_cond = p_xx < 1.0 ? (p_x - p_joint) / (1.0 - p_xx) : 0.0;
    }
    bool x_pass = u_x < std::clamp(p_x_cond, 0.0, 1.0);

    PulseOutcome out;
    out.has_xx = xx_pass && e_xx <= det.efficiency;
    out.has_x = x_pass && e_x <= det.efficiency;
    out.t_xx = pulse_t + dt_xx + j_xx;
    out.t_x = pulse_t + dt_xx + tau + j_x;
    return out;
}

// Uniform dark counts on one channel over [0, duration). Its RNG stream
// index lives far above any pulse index.
inline void append_dark_counts(std::vector<TimeTag>& events, Channel channel,
                               double dark_rate_cps, double duration_ps,
                               std::uint64_t seed) {
    if (dark_rate_cps <= 0.0 || duration_ps <= 0.0) return;
    Rng rng(mix_seed(seed, 0xD000000000000000ULL + static_cast<std::uint64_t>(channel)));
    double rate_per_ps = dark_rate_cps * 1e-12;
    long long n = rng.poisson(rate_per_ps * duration_ps);
    for (long long i = 0; i < n; ++i) {
        events.push_back({channel, rng.uniform() * duration_ps});
    }
}

inline void finalize_stream_serial(TimeTagStream& stream) {
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const TimeTag& a, const TimeTag& b) { return a.t_ps < b.t_ps; });
}

// A stable sort has a unique result, so the parallel-mode sort changes
// nothing observable.
inline void finalize_stream(TimeTagStream& stream) {
#if defined(_OPENMP) && defined(__GLIBCXX__)
    __gnu_parallel::stable_sort(
        stream.events.begin(), stream.events.end(),
        [](const TimeTag& a, const TimeTag& b) { return a.t_ps < b.t_ps; });
#else
    finalize_stream_serial(stream);
#endif
}

// Decay-weighted projection density of the pair delay, zero for tau < 0.
inline double delay_density(const CascadeParams& params, const ProjectionKernel& k,
                            double tau_ps) {
    if (tau_ps < 0.0) return 0.0;
    return std::exp(-tau_ps / params.exciton_lifetime_ps) /
           params.exciton_lifetime_ps * k.prob(tau_ps);
}

struct ExpectedGrid {
    std::vector<double> tau;     // nodes
    std::vector<double> weight;  // trapezoid weights (step included)
};

inline ExpectedGrid make_expected_grid(double lo, double hi, double target_step) {
    ExpectedGrid g;
    lo = std::max(lo, 0.0);
    if (hi <= lo) hi = lo + target_step;
    int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / target_step)));
    double h = (hi - lo) / n;
    g.tau.resize(n + 1);
    g.weight.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
        g.tau[i] = lo + h * i;
        g.weight[i] = (i == 0 || i == n) ? 0.5 * h : h;
    }
    return g;
}

// Quadrature step that divides the bin width exactly, so bin edges are
// always nodes of the per-bin grids.
inline double expected_step(const Binning& binning, double sigma) {
    double target = std::min(1.0, binning.bin_width_ps / 4.0);
    if (sigma > 0.0) target = std::min(target, sigma / 2.0);
    int per_bin = static_cast<int>(std::ceil(binning.bin_width_ps / target));
    return binning.bin_width_ps / per_bin;
}

// Nodes at integer multiples of `step` covering [lo, hi], never below the
// tau = 0 support boundary. Anchoring every grid at multiples of one step
// keeps the trapezoid bias identical across IRF settings, so convolved and
// unconvolved totals agree far below the quadrature error itself.
inline ExpectedGrid make_anchored_grid(double lo, double hi, double step) {
    ExpectedGrid g;
    long long k0 = std::max<long long>(0, static_cast<long long>(std::floor(lo / step)));
    long long k1 = static_cast<long long>(std::ceil(hi / step));
    if (k1 <= k0) k1 = k0 + 1;
    std::size_t n = static_cast<std::size_t>(k1 - k0);
    g.tau.resize(n + 1);
    g.weight.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        g.tau[i] = static_cast<double>(k0 + static_cast<long long>(i)) * step;
        g.weight[i] = (i == 0 || i == n) ? 0.5 * step : step;
    }
    return g;
}

// Flat accidental floor per bin: photon-dark cross terms on either side.
// Dark-dark pairs are second order in the dark rate and ignored.
inline double accidental_floor_per_bin(const DetectorModel& det, const PairKernels& k,
                                       double pairs_emitted, double bin_width_ps) {
    if (det.dark_rate_cps <= 0.0) return 0.0;
    double rate_per_ps = det.dark_rate_cps * 1e-12;
    // The single-arm acceptance is constant in tau for this model.
    double n_xx = pairs_emitted * det.efficiency * k.xx_single.prob(0.0);
    double n_x = pairs_emitted * det.efficiency * k.x_single.prob(0.0);
    return (n_xx + n_x) * rate_per_ps * bin_width_ps;
}

}  // namespace qdent::detail
