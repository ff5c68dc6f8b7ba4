#pragma once

#include "qdent/polarization.hpp"

namespace qdent {

// Two-photon density matrix in HH/HV/VH/VV ordering (XX photon first).
// Valid values are Hermitian, unit-trace, PSD up to 1e-10.
using DensityMatrix = Mat4c;

// Physical source model: fine-structure splitting drives the pair phase,
// cross dephasing damps the HH<->VV coherence, uncorrelated background
// admixes I/4, and a retardance error on the common-path conversion plate
// rotates the state out of the ideal basis.
struct CascadeParams {
    double fss_uev = 18.0;
    double exciton_lifetime_ps = 2000.0;
    double biexciton_lifetime_ps = 1000.0;
    double cross_dephasing_ps = 1e12;
    double background_fraction = 0.0;
    double ellipticity_delta = 0.0;  // rad, deviation from quarter-wave retardance
    double qwp1_angle = 0.0;         // rad
    double phase_offset = 0.0;       // rad, pair phase at tau = 0

    void validate() const;  // throws std::invalid_argument
};

// Pair phase S*tau/hbar accumulated over the emission delay tau.
double phase_at_delay(double fss_uev, double tau_ps);

// (|HH> + e^{i phi}|VV>)/sqrt2.
Vec4c two_photon_state(double phi);

// Second-photon polarization conditioned on a right-circular first photon:
// (e^{i phi}|L> - i e^{-i phi}|R>)/sqrt2. A linear state for every phi,
// rotating with phi; states a quarter period apart are orthogonal.
PolarizationVector exciton_photon_state(double phi);

// rho(tau): phase-evolved pair state with damped HH<->VV coherence
// (populations kept, so classical rectilinear correlations survive),
// mixed with background I/4 and conjugated by the per-photon retardance
// error U = retarder(qwp1_angle, ellipticity_delta). The ideal
// quarter-wave conversion is already absorbed into the H/V-basis state,
// so delta = 0 leaves the state untouched.
DensityMatrix density_at_delay(const CascadeParams& params, double tau_ps);

// Tr(rho * P) clamped to [0, 1].
double projection_probability(const DensityMatrix& rho, const Mat4c& projector);

// Exciton-lifetime-weighted average of rho(tau) over the window,
// renormalized to unit trace. Trapezoid quadrature, step <= 1 ps.
DensityMatrix time_windowed_density(const CascadeParams& params,
                                    double window_start_ps,
                                    double window_width_ps);

// True when m is Hermitian, unit-trace and PSD within tol.
bool is_valid_density(const DensityMatrix& m, double tol = 1e-9);

// Closed-form projection probability for a fixed (params, projector) pair:
// p(tau) = base + contrast * d(tau) * cos(phase(tau) - phase0). Exact for
// the model above; shared by the histogram and sampling kernels so the
// per-delay cost is O(1) instead of a 4x4 rebuild.
class ProjectionKernel {
  public:
    ProjectionKernel(const CascadeParams& params, const Mat4c& projector);

    double prob(double tau_ps) const;

  private:
    double omega_;      // rad/ps
    double phi0_;       // phase at tau = 0
    double inv_tdeph_;
    double base_;
    double contrast_;
    double phase0_;
};

}  // namespace qdent
