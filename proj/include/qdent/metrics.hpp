#pragma once

#include "qdent/cascade.hpp"

namespace qdent {

// Uhlmann fidelity F = Tr(sqrt(sqrt(rho) sigma sqrt(rho)))^2, in [0, 1].
// Inputs must be valid density matrices; eigenvalues in [-1e-10, 0) are
// clamped to 0 before the square roots, anything lower is rejected.
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

// <psi|rho|psi>; equals the Uhlmann fidelity when one state is pure.
double fidelity_to_pure(const DensityMatrix& rho, const Vec4c& psi);

// Wootters concurrence via the spin-flipped-spectrum construction,
// conjugation taken in the H/V product basis.
double concurrence(const DensityMatrix& rho);

// Tr(rho^2).
double purity(const DensityMatrix& rho);

struct PhaseReference {
    double theta;     // radians
    double fidelity;  // achieved value
};

// Maximizes <psi_theta|rho|psi_theta> over psi_theta = (|HH> + e^{i theta}|VV>)/sqrt2.
// Closed form: theta* = arg(rho_{VV,HH}); zero coherence resolves to theta* = 0.
PhaseReference best_phase_reference(const DensityMatrix& rho);

// Convenience Bell states in HH/HV/VH/VV ordering.
Vec4c bell_phi_plus();
Vec4c bell_phi_minus();
Vec4c bell_psi_plus();
Vec4c bell_psi_minus();

}  // namespace qdent
