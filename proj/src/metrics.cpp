#include "qdent/metrics.hpp"

#include "qdent/units.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace qdent {

namespace {

constexpr double kEigClampTol = 1e-10;

// Hermitian square root with boundary eigenvalues clamped to zero. Nearly
// zero eigenvalues are zeroed outright: sqrt would otherwise blow their
// rounding noise up to the 1e-8 scale.
Mat4c sqrt_psd(const Mat4c& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Mat4c> es(0.5 * (m + m.adjoint()));
    Eigen::Vector4d ev = es.eigenvalues();
    if (ev.minCoeff() < -kEigClampTol) {
        throw std::invalid_argument(std::string(what) +
                                    ": matrix is not positive semidefinite");
    }
    double cutoff = 1e-12 * std::max(ev.maxCoeff(), 1e-30);
    Eigen::Vector4d root = ev.unaryExpr(
        [cutoff](double x) { return x > cutoff ? std::sqrt(x) : 0.0; });
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
}

void check_density(const DensityMatrix& m, const char* what) {
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-8) {
        throw std::invalid_argument(std::string(what) + ": matrix is not Hermitian");
    }
    if (std::abs(m.trace().real() - 1.0) > 1e-6) {
        throw std::invalid_argument(std::string(what) + ": trace is not 1");
    }
}

}  // namespace

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    check_density(rho, "fidelity");
    check_density(sigma, "fidelity");
    // Tr sqrt(sqrt(rho) sigma sqrt(rho)) equals the trace norm of
    // sqrt(sigma) sqrt(rho); the singular-value route avoids taking square
    // roots of near-zero eigenvalues of the sandwiched product.
    Mat4c product = sqrt_psd(sigma, "fidelity") * sqrt_psd(rho, "fidelity");
    Eigen::JacobiSVD<Mat4c> svd(product);
    double sum = svd.singularValues().sum();
    return std::clamp(sum * sum, 0.0, 1.0);
}

double fidelity_to_pure(const DensityMatrix& rho, const Vec4c& psi) {
    double f = (psi.adjoint() * rho * psi)(0).real();
    return std::clamp(f, 0.0, 1.0);
}

double concurrence(const DensityMatrix& rho) {
    // sigma_y (x) sigma_y has entries +-1 on the anti-diagonal.
    Mat4c yy = Mat4c::Zero();
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;

    // The spin-flip spectrum lambda_i = sqrt(eig(rho Y rho* Y)) equals the
    // singular values of sqrt(rho) Y sqrt(rho)^T, which stay accurate when
    // they vanish (no square root of noisy near-zero eigenvalues).
    Mat4c root = sqrt_psd(rho, "concurrence");
    Eigen::JacobiSVD<Mat4c> svd(root * yy * root.transpose());
    Eigen::Vector4d lambdas = svd.singularValues();
    return std::max(0.0, lambdas(0) - lambdas(1) - lambdas(2) - lambdas(3));
}

double purity(const DensityMatrix& rho) { return (rho * rho).trace().real(); }

PhaseReference best_phase_reference(const DensityMatrix& rho) {
    Complex coherence = rho(3, 0);  // <VV|rho|HH>
    double pop = 0.5 * (rho(0, 0).real() + rho(3, 3).real());
    if (std::abs(coherence) < 1e-14) {
        return {0.0, pop};
    }
    return {std::arg(coherence), pop + std::abs(coherence)};
}

Vec4c bell_phi_plus() { return two_photon_state(0.0); }
Vec4c bell_phi_minus() { return two_photon_state(kPi); }

Vec4c bell_psi_plus() {
    Vec4c v;
    v << 0.0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0;
    return v;
}

Vec4c bell_psi_minus() {
    Vec4c v;
    v << 0.0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0;
    return v;
}

}  // namespace qdent
