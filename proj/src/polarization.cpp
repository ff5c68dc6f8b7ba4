#include "qdent/polarization.hpp"

#include "qdent/units.hpp"

#include <cmath>
#include <stdexcept>

namespace qdent {

namespace {

Vec2c normalized_or_throw(const Vec2c& v) {
    double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw std::invalid_argument("polarization state must have nonzero finite norm");
    }
    return v / n;
}

Mat2c rotation(double theta) {
    double c = std::cos(theta), s = std::sin(theta);
    Mat2c r;
    r << c, -s, s, c;
    return r;
}

}  // namespace

PolarizationVector::PolarizationVector(Complex h, Complex v)
    : amp(normalized_or_throw(Vec2c(h, v))) {}

PolarizationVector::PolarizationVector(const Vec2c& v) : amp(normalized_or_throw(v)) {}

double overlap2(const PolarizationVector& a, const PolarizationVector& b) {
    return std::norm(a.amp.dot(b.amp));
}

PolarizationVector basis_state(char label) {
    const double s = 1.0 / std::sqrt(2.0);
    switch (label) {
        case 'H': return {1.0, 0.0};
        case 'V': return {0.0, 1.0};
        case 'D': return {s, s};
        case 'A': return {s, -s};
        case 'R': return {s, Complex(0.0, -s)};
        case 'L': return {s, Complex(0.0, s)};
        default:
            throw std::invalid_argument(std::string("unknown polarization label '") +
                                        label + "'");
    }
}

Mat2c jones_retarder(double theta, double retardance) {
    if (!std::isfinite(theta) || !std::isfinite(retardance)) {
        throw std::invalid_argument("retarder angles must be finite");
    }
    Mat2c d = Mat2c::Zero();
    d(0, 0) = 1.0;
    d(1, 1) = std::exp(Complex(0.0, retardance));
    return rotation(theta) * d * rotation(-theta);
}

Mat2c jones_hwp(double theta) { return jones_retarder(theta, kPi); }

Mat2c jones_qwp(double theta) { return jones_retarder(theta, kPi / 2.0); }

Mat2c jones_polarizer(double axis) {
    Vec2c p(std::cos(axis), std::sin(axis));
    return p * p.adjoint();
}

PolarizationVector analyzer_projection_state(const AnalyzerSetting& setting) {
    Vec2c state(std::cos(setting.pol_axis), std::sin(setting.pol_axis));
    state = jones_hwp(setting.hwp_angle).adjoint() * state;
    if (setting.qwp_angle) {
        state = jones_qwp(*setting.qwp_angle).adjoint() * state;
    }
    return PolarizationVector(state);
}

AnalyzerSetting canonical_setting(char label) {
    // Polarizer fixed to H; waveplates select the projection basis.
    switch (label) {
        case 'H': return {0.0, 0.0, 0.0, "H"};
        case 'V': return {0.0, kPi / 4.0, 0.0, "V"};
        case 'D': return {kPi / 4.0, kPi / 8.0, 0.0, "D"};
        case 'A': return {-kPi / 4.0, -kPi / 8.0, 0.0, "A"};
        case 'R': return {-kPi / 4.0, 0.0, 0.0, "R"};
        case 'L': return {kPi / 4.0, 0.0, 0.0, "L"};
        default:
            throw std::invalid_argument(std::string("unknown analyzer label '") +
                                        label + "'");
    }
}

Mat4c kron(const Mat2c& a, const Mat2c& b) {
    Mat4c out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

Vec4c kron(const Vec2c& a, const Vec2c& b) {
    Vec4c out;
    out << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
    return out;
}

Mat4c two_photon_projector(const PolarizationVector& xx_arm,
                           const PolarizationVector& x_arm) {
    Vec4c v = kron(xx_arm.amp, x_arm.amp);
    return v * v.adjoint();
}

}  // namespace qdent
