#include "qdent/fitting.hpp"

#include "qdent/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qdent {

void Spectrum::validate() const {
    if (x.size() != intensity.size())
        throw std::invalid_argument("spectrum axis/intensity size mismatch");
    if (x.size() < 8) throw std::invalid_argument("spectrum needs at least 8 points");
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1]))
            throw std::invalid_argument("spectrum axis must be strictly increasing");
    }
}

std::vector<double> Spectrum::energy_axis_uev() const {
    std::vector<double> e(x.size());
    if (axis == Axis::energy_uev) {
        e = x;
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
            e[i] = energy_uev_from_wavelength_nm(x[i]);
        }
        std::reverse(e.begin(), e.end());  // keep the axis increasing
    }
    return e;
}

double FitResult::param(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return params(static_cast<Eigen::Index>(i));
    }
    throw std::invalid_argument("unknown fit parameter '" + name + "'");
}

double FitResult::stderr_of(const std::string& name) const {
    if (stderrs.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return stderrs(static_cast<Eigen::Index>(i));
    }
    throw std::invalid_argument("unknown fit parameter '" + name + "'");
}

namespace {

// Central differences with h ~ eps^(1/3): the Jacobian noise floor is what
// limits how closely Gauss-Newton can pin the optimum.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0) {
    const Eigen::Index n = r0.size(), m = p.size();
    Eigen::MatrixXd jac(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double h = 6.06e-6 * std::max(std::abs(p(j)), 1.0);
        Eigen::VectorXd lo = p, hi = p;
        hi(j) += h;
        lo(j) -= h;
        jac.col(j) = (f(hi) - f(lo)) / (2.0 * h);
    }
    return jac;
}

}  // namespace

FitResult least_squares(const ResidualFn& residuals, const Eigen::VectorXd& initial,
                        const std::vector<std::string>& names,
                        const LsqOptions& options) {
    if (!initial.allFinite())
        throw std::invalid_argument("initial guess must be finite");
    if (static_cast<std::size_t>(initial.size()) != names.size())
        throw std::invalid_argument("parameter name count mismatch");

    Eigen::VectorXd p = initial;
    Eigen::VectorXd r = residuals(p);
    if (r.size() < p.size())
        throw std::invalid_argument("fewer residuals than parameters");

    double rss = r.squaredNorm();
    if (options.rss_trace) options.rss_trace->push_back(rss);

    FitResult out;
    out.names = names;

    double lambda = 1e-3;
    int iter = 0;
    bool converged = rss == 0.0;
    bool rank_deficient = false;

    while (iter < options.max_iter && !converged) {
        ++iter;
        Eigen::MatrixXd jac = numeric_jacobian(residuals, p, r);
        Eigen::MatrixXd jtj = jac.transpose() * jac;
        Eigen::VectorXd jtr = jac.transpose() * r;

        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
        if (qr.rank() < p.size()) rank_deficient = true;

        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            Eigen::MatrixXd damped = jtj;
            for (Eigen::Index j = 0; j < p.size(); ++j) {
                damped(j, j) += lambda * std::max(jtj(j, j), 1e-12);
            }
            Eigen::VectorXd step = damped.ldlt().solve(-jtr);
            Eigen::VectorXd trial = p + step;
            Eigen::VectorXd r_trial = residuals(trial);
            double rss_trial = r_trial.squaredNorm();
            if (rss_trial <= rss && r_trial.allFinite()) {
                double rel = (rss - rss_trial) / (rss + 1e-300);
                p = trial;
                r = r_trial;
                rss = rss_trial;
                lambda = std::max(lambda / 3.0, 1e-14);
                accepted = true;
                if (options.rss_trace) options.rss_trace->push_back(rss);
                if (rel < options.tol || step.norm() < options.step_tol) {
                    converged = true;
                }
                break;
            }
            lambda *= 8.0;
        }
        if (!accepted) {
            // No downhill step left; accept as converged only if the
            // gradient has actually vanished at this resolution.
            converged = jtr.lpNorm<Eigen::Infinity>() <= 1e-8 * (rss + 1.0);
            break;
        }
    }

    // Undamped polish: the accepted LM steps carry an O(lambda) bias, one
    // or two Gauss-Newton steps remove it (exactly so for linear models).
    if (converged) {
        for (int polish = 0; polish < 3; ++polish) {
            Eigen::MatrixXd jac = numeric_jacobian(residuals, p, r);
            Eigen::MatrixXd jtj = jac.transpose() * jac;
            for (Eigen::Index j = 0; j < p.size(); ++j) {
                jtj(j, j) += 1e-14 * std::max(jtj(j, j), 1e-12);
            }
            Eigen::VectorXd step = jtj.ldlt().solve(-jac.transpose() * r);
            Eigen::VectorXd trial = p + step;
            Eigen::VectorXd r_trial = residuals(trial);
            // Neutral moves at the rounding floor are fine here.
            if (!r_trial.allFinite() ||
                r_trial.squaredNorm() > rss * (1.0 + 1e-12) + 1e-300) {
                break;
            }
            p = trial;
            r = r_trial;
            rss = r.squaredNorm();
            if (step.norm() < options.step_tol) break;
        }
    }

    out.params = p;
    out.residual_norm = std::sqrt(rss);
    out.converged = converged;
    out.rank_deficient = rank_deficient;
    out.n_iter = iter;

    if (converged && !rank_deficient && r.size() > p.size()) {
        Eigen::MatrixXd jac = numeric_jacobian(residuals, p, r);
        Eigen::MatrixXd jtj = jac.transpose() * jac;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
        if (lu.isInvertible()) {
            double s2 = rss / static_cast<double>(r.size() - p.size());
            Eigen::MatrixXd cov = lu.inverse() * s2;
            out.stderrs = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        }
    }
    return out;
}

FitResult fit_lorentzian(const Spectrum& spectrum,
                         std::optional<Eigen::Vector4d> initial_guess) {
    spectrum.validate();
    std::vector<double> x = spectrum.energy_axis_uev();
    std::vector<double> y = spectrum.intensity;
    if (spectrum.axis == Spectrum::Axis::wavelength_nm) {
        std::reverse(y.begin(), y.end());
    }
    const Eigen::Index n = static_cast<Eigen::Index>(x.size());

    std::vector<double> sorted = y;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    double median = sorted[sorted.size() / 2];
    double peak = *std::max_element(y.begin(), y.end());
    if (!(peak > 3.0 * std::max(median, 1e-300))) {
        throw std::invalid_argument("no clear peak in spectrum (max <= 3x median)");
    }

    Eigen::Vector4d p0;
    if (initial_guess) {
        p0 = *initial_guess;
    } else {
        std::size_t imax =
            std::max_element(y.begin(), y.end()) - y.begin();
        double offset = *std::min_element(y.begin(), y.end());
        double amp = peak - offset;
        double half = offset + 0.5 * amp;
        // Half-max crossing scan outward from the peak.
        double lo = x.front(), hi = x.back();
        for (std::size_t i = imax; i-- > 0;) {
            if (y[i] < half) {
                lo = x[i];
                break;
            }
        }
        for (std::size_t i = imax + 1; i < y.size(); ++i) {
            if (y[i] < half) {
                hi = x[i];
                break;
            }
        }
        double fwhm = std::max(hi - lo, (x.back() - x.front()) / n);
        p0 << x[imax], fwhm, amp, offset;
    }

    auto model = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(n);
        double hw2 = 0.25 * p(1) * p(1);
        for (Eigen::Index i = 0; i < n; ++i) {
            double dx = x[static_cast<std::size_t>(i)] - p(0);
            r(i) = p(2) * hw2 / (dx * dx + hw2) + p(3) -
                   y[static_cast<std::size_t>(i)];
        }
        return r;
    };

    FitResult fit = least_squares(model, p0, {"center_uev", "fwhm_uev", "amplitude", "offset"});
    fit.params(1) = std::abs(fit.params(1));  // width enters squared
    return fit;
}

namespace {

FitResult fit_cos4_series(const std::vector<std::pair<double, double>>& pts,
                          const std::vector<std::pair<double, double>>& pts_anti,
                          bool paired) {
    if (pts.size() < 8 || (paired && pts_anti.size() < 8)) {
        throw std::invalid_argument("FSS fit needs at least 8 angle points");
    }
    auto span = [](const std::vector<std::pair<double, double>>& v) {
        auto [mn, mx] = std::minmax_element(
            v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
        return mx->first - mn->first;
    };
    if (span(pts) < kPi / 2.0 - 1e-9) {
        throw std::invalid_argument("FSS fit needs an HWP span of at least pi/2");
    }

    // Linear pre-fit in (E0, a, b) with E = E0 + a cos4t + b sin4t gives the
    // exact least-squares start for the unpaired case.
    auto linear_start = [](const std::vector<std::pair<double, double>>& v) {
        Eigen::MatrixXd m(v.size(), 3);
        Eigen::VectorXd rhs(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            m(i, 0) = 1.0;
            m(i, 1) = std::cos(4.0 * v[i].first);
            m(i, 2) = std::sin(4.0 * v[i].first);
            rhs(i) = v[i].second;
        }
        return Eigen::VectorXd(m.colPivHouseholderQr().solve(rhs));
    };

    Eigen::VectorXd lin = linear_start(pts);
    double s0 = 2.0 * std::hypot(lin(1), lin(2));
    double phi0 = std::atan2(-lin(2), lin(1));

    FitResult fit;
    if (!paired) {
        Eigen::VectorXd p0(3);
        p0 << s0, phi0, lin(0);
        auto model = [&](const Eigen::VectorXd& p) {
            Eigen::VectorXd r(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) {
                r(i) = p(2) + 0.5 * p(0) * std::cos(4.0 * pts[i].first + p(1)) -
                       pts[i].second;
            }
            return r;
        };
        fit = least_squares(model, p0, {"S_uev", "phase0", "mean_energy_uev"});
    } else {
        Eigen::VectorXd lin2 = linear_start(pts_anti);
        Eigen::VectorXd p0(4);
        p0 << s0, phi0, lin(0), lin2(0);
        auto model = [&](const Eigen::VectorXd& p) {
            Eigen::VectorXd r(pts.size() + pts_anti.size());
            for (std::size_t i = 0; i < pts.size(); ++i) {
                r(i) = p(2) + 0.5 * p(0) * std::cos(4.0 * pts[i].first + p(1)) -
                       pts[i].second;
            }
            for (std::size_t i = 0; i < pts_anti.size(); ++i) {
                r(pts.size() + i) =
                    p(3) + 0.5 * p(0) * std::cos(4.0 * pts_anti[i].first + p(1) + kPi) -
                    pts_anti[i].second;
            }
            return r;
        };
        fit = least_squares(model, p0,
                            {"S_uev", "phase0", "mean_energy_x_uev",
                             "mean_energy_xx_uev"});
    }

    // Report S >= 0, absorbing the sign into the phase.
    if (fit.params(0) < 0.0) {
        fit.params(0) = -fit.params(0);
        fit.params(1) += kPi;
    }
    fit.params(1) = std::remainder(fit.params(1), 2.0 * kPi);
    return fit;
}

}  // namespace

FitResult fit_fss_oscillation(const std::vector<std::pair<double, double>>& angle_energy,
                              bool with_qwp) {
    FitResult fit = fit_cos4_series(angle_energy, {}, false);
    fit.note = with_qwp ? "with_qwp" : "without_qwp";
    return fit;
}

FitResult fit_fss_oscillation_pair(
    const std::vector<std::pair<double, double>>& x_series,
    const std::vector<std::pair<double, double>>& xx_series) {
    return fit_cos4_series(x_series, xx_series, true);
}

FitResult fit_damped_cosine(const CoincidenceHistogram& hist,
                            std::optional<double> period_guess_ps) {
    const std::size_t n = hist.counts.size();
    if (n < 8) throw std::invalid_argument("histogram too short for oscillation fit");

    std::vector<double> tau(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        tau[i] = hist.bin_center(i);
        y[i] = hist.counts[i];
    }
    double span = tau.back() - tau.front();

    double decay0 = span / 2.0;

    // Coarse period scan with linearized amplitudes, then LM refinement.
    auto scan_rss = [&](double period, Eigen::Vector4d* coeffs) {
        Eigen::MatrixXd m(n, 4);
        Eigen::VectorXd rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            double e = std::exp(-tau[i] / decay0);
            double w = 2.0 * kPi * tau[i] / period;
            m(i, 0) = e;
            m(i, 1) = e * std::cos(w);
            m(i, 2) = e * std::sin(w);
            m(i, 3) = 1.0;
            rhs(i) = y[i];
        }
        Eigen::Vector4d c = (m.transpose() * m)
                                .ldlt()
                                .solve(m.transpose() * rhs);
        if (coeffs) *coeffs = c;
        return (m * c - rhs).squaredNorm();
    };

    double best_period = period_guess_ps.value_or(0.0);
    if (!period_guess_ps) {
        double best_rss = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 64; ++k) {
            double period = 50.0 + (1000.0 - 50.0) * k / 63.0;
            double rss = scan_rss(period, nullptr);
            if (rss < best_rss) {
                best_rss = rss;
                best_period = period;
            }
        }
    }
    if (!(span >= 1.5 * best_period)) {
        throw std::invalid_argument(
            "histogram span must cover at least 1.5 oscillation periods");
    }

    Eigen::Vector4d c;
    scan_rss(best_period, &c);
    Eigen::VectorXd p0(6);
    p0 << best_period, std::atan2(-c(2), c(1)), std::hypot(c(1), c(2)), c(0), decay0,
        c(3);

    auto model = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(n);
        for (std::size_t i = 0; i < n; ++i) {
            double e = std::exp(-tau[i] / p(4));
            r(i) = e * (p(3) + p(2) * std::cos(2.0 * kPi * tau[i] / p(0) + p(1))) +
                   p(5) - y[i];
        }
        return r;
    };

    FitResult fit = least_squares(
        model, p0,
        {"period_ps", "phase", "amplitude", "level", "decay_time_ps", "offset"});

    if (fit.params(2) < 0.0) {
        fit.params(2) = -fit.params(2);
        fit.params(1) += kPi;
    }
    fit.params(0) = std::abs(fit.params(0));
    fit.params(1) = std::remainder(fit.params(1), 2.0 * kPi);
    return fit;
}

}  // namespace qdent
