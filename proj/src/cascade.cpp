#include "qdent/cascade.hpp"

#include "qdent/units.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace qdent {

void CascadeParams::validate() const {
    if (!(fss_uev >= 0.0)) throw std::invalid_argument("fss_uev must be >= 0");
    if (!(exciton_lifetime_ps > 0.0))
        throw std::invalid_argument("exciton_lifetime_ps must be > 0");
    if (!(biexciton_lifetime_ps > 0.0))
        throw std::invalid_argument("biexciton_lifetime_ps must be > 0");
    if (!(cross_dephasing_ps > 0.0))
        throw std::invalid_argument("cross_dephasing_ps must be > 0");
    if (!(background_fraction >= 0.0 && background_fraction <= 1.0))
        throw std::invalid_argument("background_fraction must be in [0, 1]");
    if (!std::isfinite(ellipticity_delta) || !std::isfinite(qwp1_angle) ||
        !std::isfinite(phase_offset))
        throw std::invalid_argument("cascade angles must be finite");
}

double phase_at_delay(double fss_uev, double tau_ps) {
    if (!(tau_ps >= 0.0)) throw std::invalid_argument("tau_ps must be >= 0");
    return fss_uev * tau_ps / kHbarUevPs;
}

Vec4c two_photon_state(double phi) {
    const double s = 1.0 / std::sqrt(2.0);
    Vec4c v;
    v << s, 0.0, 0.0, s * std::exp(Complex(0.0, phi));
    return v;
}

PolarizationVector exciton_photon_state(double phi) {
    Vec2c l = basis_state('L').amp;
    Vec2c r = basis_state('R').amp;
    Vec2c v = (std::exp(Complex(0.0, phi)) * l -
               Complex(0.0, 1.0) * std::exp(Complex(0.0, -phi)) * r) /
              std::sqrt(2.0);
    return PolarizationVector(v);
}

namespace {

// Retardance-error unitary of the common conversion plate; identity at delta = 0.
Mat2c conversion_error_unitary(const CascadeParams& p) {
    return jones_retarder(p.qwp1_angle, p.ellipticity_delta);
}

// rho(tau) before the error-unitary conjugation, split into a tau-independent
// part and the coherence term whose weight is d(tau) e^{+-i phi(tau)}.
struct ModelParts {
    Mat4c constant;   // classical populations + background, already conjugated
    Mat4c coherence;  // (U (x) U) |HH><VV| (U (x) U)^dag, weight (1-b)/2 d e^{-i phi}
};

ModelParts model_parts(const CascadeParams& p) {
    Mat2c u = conversion_error_unitary(p);
    Mat4c uu = kron(u, u);

    Mat4c classical = Mat4c::Zero();
    classical(0, 0) = 0.5;
    classical(3, 3) = 0.5;

    double b = p.background_fraction;
    Mat4c constant = (1.0 - b) * classical + b * 0.25 * Mat4c::Identity();

    Mat4c hhvv = Mat4c::Zero();
    hhvv(0, 3) = 1.0;

    ModelParts parts;
    parts.constant = uu * constant * uu.adjoint();
    parts.coherence = uu * hhvv * uu.adjoint();
    return parts;
}

}  // namespace

DensityMatrix density_at_delay(const CascadeParams& params, double tau_ps) {
    params.validate();
    if (!(tau_ps >= 0.0)) throw std::invalid_argument("tau_ps must be >= 0");

    ModelParts parts = model_parts(params);
    double phi = phase_at_delay(params.fss_uev, tau_ps) + params.phase_offset;
    double damping = std::exp(-tau_ps / params.cross_dephasing_ps);
    Complex w = 0.5 * (1.0 - params.background_fraction) * damping *
                std::exp(Complex(0.0, -phi));

    DensityMatrix rho = parts.constant + w * parts.coherence +
                        std::conj(w) * parts.coherence.adjoint();
    return rho;
}

double projection_probability(const DensityMatrix& rho, const Mat4c& projector) {
    double p = (rho * projector).trace().real();
    return std::clamp(p, 0.0, 1.0);
}

DensityMatrix time_windowed_density(const CascadeParams& params,
                                    double window_start_ps,
                                    double window_width_ps) {
    params.validate();
    if (!(window_width_ps > 0.0))
        throw std::invalid_argument("window_width_ps must be > 0");
    if (!(window_start_ps >= 0.0))
        throw std::invalid_argument("window_start_ps must be >= 0");

    double step = std::min(1.0, window_width_ps / 64.0);
    int n_steps = static_cast<int>(std::ceil(window_width_ps / step));
    step = window_width_ps / n_steps;

    std::vector<Mat4c> node_terms(n_steps + 1);
    std::vector<double> node_weights(n_steps + 1);

#pragma omp parallel for schedule(static)
    for (int i = 0; i <= n_steps; ++i) {
        double tau = window_start_ps + i * step;
        double w = std::exp(-tau / params.exciton_lifetime_ps);
        if (i == 0 || i == n_steps) w *= 0.5;
        node_terms[i] = w * density_at_delay(params, tau);
        node_weights[i] = w;
    }

    // Serial accumulation in node order keeps the result independent of
    // the thread count.
    Mat4c sum = Mat4c::Zero();
    double weight_sum = 0.0;
    for (int i = 0; i <= n_steps; ++i) {
        sum += node_terms[i];
        weight_sum += node_weights[i];
    }
    return sum / weight_sum;
}

bool is_valid_density(const DensityMatrix& m, double tol) {
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
    if (std::abs(m.trace().real() - 1.0) > tol || std::abs(m.trace().imag()) > tol)
        return false;
    Eigen::SelfAdjointEigenSolver<Mat4c> es(0.5 * (m + m.adjoint()),
                                            Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

ProjectionKernel::ProjectionKernel(const CascadeParams& params, const Mat4c& projector) {
    params.validate();
    omega_ = params.fss_uev / kHbarUevPs;
    phi0_ = params.phase_offset;
    inv_tdeph_ = 1.0 / params.cross_dephasing_ps;

    ModelParts parts = model_parts(params);
    base_ = (parts.constant * projector).trace().real();
    Complex c = (1.0 - params.background_fraction) *
                (parts.coherence * projector).trace();
    contrast_ = std::abs(c);
    phase0_ = std::arg(c);
}

double ProjectionKernel::prob(double tau_ps) const {
    double phi = omega_ * tau_ps + phi0_;
    double p = base_ + contrast_ * std::exp(-tau_ps * inv_tdeph_) *
                           std::cos(phase0_ - phi);
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace qdent
