#pragma once

#include "qdent/histogram.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qdent {

struct Spectrum {
    enum class Axis { wavelength_nm, energy_uev };
    Axis axis = Axis::wavelength_nm;
    std::vector<double> x;
    std::vector<double> intensity;

    void validate() const;  // >= 8 points, strictly monotonic axis
    // Fits run on the energy axis; wavelength input is converted here.
    std::vector<double> energy_axis_uev() const;
};

struct FitResult {
    std::vector<std::string> names;
    Eigen::VectorXd params;
    Eigen::VectorXd stderrs;  // empty unless converged with a full-rank Jacobian
    double residual_norm = 0.0;
    bool converged = false;
    bool rank_deficient = false;
    int n_iter = 0;
    std::string note;

    double param(const std::string& name) const;
    double stderr_of(const std::string& name) const;  // NaN when absent
};

struct LsqOptions {
    int max_iter = 200;
    double tol = 1e-10;        // relative residual-norm change
    double step_tol = 1e-12;   // parameter step
    std::vector<double>* rss_trace = nullptr;  // accepted RSS per iteration
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Damped least squares (Levenberg-Marquardt with forward-difference
// Jacobians). Steps are only accepted when the residual norm decreases.
FitResult least_squares(const ResidualFn& residuals, const Eigen::VectorXd& initial,
                        const std::vector<std::string>& names,
                        const LsqOptions& options = {});

// Lorentzian line A*(G/2)^2/((x-x0)^2+(G/2)^2) + B on the energy axis.
// Params: center_uev, fwhm_uev, amplitude, offset.
FitResult fit_lorentzian(const Spectrum& spectrum,
                         std::optional<Eigen::Vector4d> initial_guess = {});

// Line-center oscillation vs HWP angle: E(theta) = E0 + (S/2) cos(4 theta + phi0).
// S is reported positive (peak-to-peak amplitude); params: S_uev, phase0,
// mean_energy_uev. with_qwp only annotates the result.
FitResult fit_fss_oscillation(const std::vector<std::pair<double, double>>& angle_energy,
                              bool with_qwp);

// Joint fit of paired X/XX center series sharing one amplitude with the
// XX series anti-phased: params S_uev, phase0, mean_energy_x_uev,
// mean_energy_xx_uev.
FitResult fit_fss_oscillation_pair(
    const std::vector<std::pair<double, double>>& x_series,
    const std::vector<std::pair<double, double>>& xx_series);

// Damped oscillation over bin centers:
// N(tau) = exp(-tau/T_d) * (A + B cos(2 pi tau / T + phi)) + C.
// Params: period_ps, phase, amplitude, level, decay_time_ps, offset.
FitResult fit_damped_cosine(const CoincidenceHistogram& hist,
                            std::optional<double> period_guess_ps = {});

}  // namespace qdent
