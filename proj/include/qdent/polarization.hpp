#pragma once

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <string>
#include <utility>

namespace qdent {

using Complex = std::complex<double>;
using Vec2c = Eigen::Vector2cd;
using Mat2c = Eigen::Matrix2cd;
using Vec4c = Eigen::Vector4cd;
using Mat4c = Eigen::Matrix4cd;

// Single-photon pure polarization state, (amp_h, amp_v) in the H/V basis.
// Normalized on construction; global phase carries no meaning.
//
// Convention fixed project-wide: D = (H+V)/sqrt2, A = (H-V)/sqrt2,
// R = (H-iV)/sqrt2, L = (H+iV)/sqrt2, quarter-wave retardance diag(1, i).
// Under this choice a QWP at 45 deg maps H to R.
struct PolarizationVector {
    Vec2c amp;

    PolarizationVector(Complex h, Complex v);
    explicit PolarizationVector(const Vec2c& v);

    Complex amp_h() const { return amp(0); }
    Complex amp_v() const { return amp(1); }
};

// Squared overlap |<a|b>|^2; state equality ignores global phase.
double overlap2(const PolarizationVector& a, const PolarizationVector& b);

// Canonical state for a label in {H,V,D,A,R,L}. Unknown label throws.
PolarizationVector basis_state(char label);

// Linear retarder, fast axis at theta from H: R(theta) diag(1, e^{i*ret}) R(-theta).
Mat2c jones_retarder(double theta, double retardance);

// HWP: [[cos2t, sin2t], [sin2t, -cos2t]].
Mat2c jones_hwp(double theta);

// QWP: retardance pi/2, i.e. R(theta) diag(1, i) R(-theta).
Mat2c jones_qwp(double theta);

// Rank-1 projector onto the linear polarization at angle `axis` from H.
Mat2c jones_polarizer(double axis);

// One arm of the analyzer chain: QWP -> HWP -> fixed polarizer.
// qwp_angle is empty when the quarter-wave plate is removed from the path.
struct AnalyzerSetting {
    std::optional<double> qwp_angle;  // radians, fast axis from H
    double hwp_angle = 0.0;           // radians
    double pol_axis = 0.0;            // radians, transmission axis from H
    std::string label;
};

// The state fully transmitted by the chain: QWP^dag * HWP^dag * |pol_axis>.
PolarizationVector analyzer_projection_state(const AnalyzerSetting& setting);

// Canonical analyzer realizing a basis label with the polarizer fixed to H.
AnalyzerSetting canonical_setting(char label);

// Kronecker products in HH/HV/VH/VV ordering, first factor = XX arm.
Mat4c kron(const Mat2c& a, const Mat2c& b);
Vec4c kron(const Vec2c& a, const Vec2c& b);

// |xx><xx| (x) |x><x|, a rank-1 two-photon projector.
Mat4c two_photon_projector(const PolarizationVector& xx_arm,
                           const PolarizationVector& x_arm);

}  // namespace qdent
