#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qdent/fitting.hpp"
#include "qdent/rng.hpp"
#include "qdent/units.hpp"

#include <cmath>

using namespace qdent;

namespace {

Spectrum lorentzian_wavelength_spectrum(double x0_nm, double fwhm_nm, double amp,
                                        double offset, double noise_sigma,
                                        std::uint64_t seed) {
    Spectrum s;
    s.axis = Spectrum::Axis::wavelength_nm;
    Rng rng(seed);
    for (int i = 0; i < 201; ++i) {
        double x = x0_nm - 0.5 + i * (1.0 / 200.0);
        double hw2 = 0.25 * fwhm_nm * fwhm_nm;
        double y = amp * hw2 / ((x - x0_nm) * (x - x0_nm) + hw2) + offset;
        if (noise_sigma > 0.0) y += rng.normal(noise_sigma);
        s.x.push_back(x);
        s.intensity.push_back(y);
    }
    return s;
}

CoincidenceHistogram damped_cosine_histogram(double period, double phase, double amp,
                                             double level, double decay,
                                             double offset, double bin_width,
                                             double bin_start, int n_bins) {
    CoincidenceHistogram h;
    h.bin_width_ps = bin_width;
    h.bin_start_ps = bin_start;
    for (int i = 0; i < n_bins; ++i) {
        double tau = h.bin_center(i);
        h.counts.push_back(std::exp(-tau / decay) *
                               (level + amp * std::cos(2.0 * kPi * tau / period +
                                                        phase)) +
                           offset);
    }
    return h;
}

std::vector<std::pair<double, double>> fss_series(double s_uev, double phase,
                                                  double e0, int n_points,
                                                  double noise,
                                                  std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < n_points; ++i) {
        double theta = i * (kPi / 2.0) / (n_points - 1);
        double e = e0 + 0.5 * s_uev * std::cos(4.0 * theta + phase);
        if (noise > 0.0) e += rng.normal(noise);
        pts.emplace_back(theta, e);
    }
    return pts;
}

}  // namespace

TEST_CASE("least squares matches the normal equations for a linear model") {
    // y = a + b x over fixed points; closed-form solution via normal equations.
    std::vector<double> xs, ys;
    Rng rng(51);
    for (int i = 0; i < 25; ++i) {
        xs.push_back(i * 0.4);
        ys.push_back(3.25 - 1.7 * xs.back() + rng.normal(0.3));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double n = static_cast<double>(xs.size());
    double b_hat = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double a_hat = (sy - b_hat * sx) / n;

    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            r(static_cast<Eigen::Index>(i)) = p(0) + p(1) * xs[i] - ys[i];
        }
        return r;
    };
    Eigen::VectorXd init(2);
    init << 0.0, 0.0;
    FitResult fit = least_squares(residuals, init, {"a", "b"});
    CHECK(fit.converged);
    CHECK(fit.param("a") == doctest::Approx(a_hat).epsilon(1e-10));
    CHECK(fit.param("b") == doctest::Approx(b_hat).epsilon(1e-10));
}

TEST_CASE("zero-residual start returns immediately") {
    auto residuals = [](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(3);
        r << p(0) - 1.0, 2.0 * (p(0) - 1.0), 0.0;
        return r;
    };
    Eigen::VectorXd init(1);
    init << 1.0;
    FitResult fit = least_squares(residuals, init, {"p"});
    CHECK(fit.converged);
    CHECK(fit.n_iter <= 1);
}

TEST_CASE("rank-deficient Jacobian is flagged without crashing") {
    // Two parameters enter only through their sum.
    auto residuals = [](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(5);
        for (int i = 0; i < 5; ++i) r(i) = p(0) + p(1) - static_cast<double>(i);
        return r;
    };
    Eigen::VectorXd init(2);
    init << 0.0, 0.0;
    FitResult fit = least_squares(residuals, init, {"u", "v"});
    CHECK(fit.rank_deficient);
    CHECK(fit.stderrs.size() == 0);
}

TEST_CASE("accepted residual norm never increases") {
    std::vector<double> trace;
    LsqOptions options;
    options.rss_trace = &trace;
    auto residuals = [](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(8);
        for (int i = 0; i < 8; ++i) {
            double x = 0.3 * i;
            r(i) = std::exp(-p(0) * x) * p(1) - (2.0 * std::exp(-0.7 * x) + 0.01 * i);
        }
        return r;
    };
    Eigen::VectorXd init(2);
    init << 0.1, 0.5;
    least_squares(residuals, init, {"k", "a"}, options);
    REQUIRE(trace.size() > 1);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
}

TEST_CASE("Lorentzian round trip from a wavelength spectrum") {
    Spectrum s = lorentzian_wavelength_spectrum(915.0, 0.05, 1000.0, 50.0, 0.0, 0);
    FitResult fit = fit_lorentzian(s);
    REQUIRE(fit.converged);

    double center_nm = wavelength_nm_from_energy_uev(fit.param("center_uev"));
    CHECK(std::abs(center_nm - 915.0) / 915.0 < 1e-6);

    // Map the energy width back through the local dispersion.
    double lam = center_nm;
    double fwhm_nm = fit.param("fwhm_uev") * lam * lam / (kEvNm * 1e6);
    CHECK(std::abs(fwhm_nm - 0.05) / 0.05 < 1e-4);
    CHECK(fit.param("amplitude") == doctest::Approx(1000.0).epsilon(1e-4));
    CHECK(fit.param("offset") == doctest::Approx(50.0).epsilon(1e-4));
}

TEST_CASE("Lorentzian center on symmetric energy data is the symmetry point") {
    Spectrum s;
    s.axis = Spectrum::Axis::energy_uev;
    for (int i = 0; i <= 100; ++i) {
        double x = -50.0 + i;
        s.x.push_back(1000.0 + x);
        s.intensity.push_back(80.0 / (x * x + 16.0) * 16.0 + 2.0);
    }
    FitResult fit = fit_lorentzian(s);
    CHECK(fit.param("center_uev") == doctest::Approx(1000.0).epsilon(1e-10));
}

TEST_CASE("Lorentzian stderr covers the truth at noise") {
    int covered = 0;
    const int n_seeds = 200;
    for (int seed = 0; seed < n_seeds; ++seed) {
        Spectrum s = lorentzian_wavelength_spectrum(
            915.0, 0.05, 1000.0, 50.0, 50.0, 1000 + seed);
        FitResult fit = fit_lorentzian(s);
        if (!fit.converged || fit.stderrs.size() == 0) continue;
        double truth = energy_uev_from_wavelength_nm(915.0);
        if (std::abs(fit.param("center_uev") - truth) <=
            3.0 * fit.stderr_of("center_uev")) {
            ++covered;
        }
    }
    CHECK(covered >= static_cast<int>(0.95 * n_seeds));
}

TEST_CASE("flat spectrum is rejected as peakless") {
    Spectrum s;
    s.axis = Spectrum::Axis::energy_uev;
    for (int i = 0; i < 32; ++i) {
        s.x.push_back(i);
        s.intensity.push_back(10.0);
    }
    CHECK_THROWS_AS(fit_lorentzian(s), std::invalid_argument);
}

TEST_CASE("FSS oscillation recovery") {
    FitResult fit = fit_fss_oscillation(fss_series(18.0, 0.4, 1.3e6, 16, 0.0, 0),
                                        /*with_qwp=*/true);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.param("S_uev") - 18.0) < 0.1);
    CHECK(fit.param("mean_energy_uev") == doctest::Approx(1.3e6).epsilon(1e-9));
    CHECK(fit.note == "with_qwp");
}

TEST_CASE("flat FSS series fits zero amplitude") {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 12; ++i) {
        pts.emplace_back(i * kPi / 16.0, 1.3e6);
    }
    FitResult fit = fit_fss_oscillation(pts, false);
    CHECK(std::abs(fit.param("S_uev")) < 1e-6);
}

TEST_CASE("paired anti-phase series share one amplitude") {
    auto x_pts = fss_series(18.0, 0.4, 1.30e6, 14, 0.02, 1);
    auto xx_pts = fss_series(18.0, 0.4 + kPi, 1.31e6, 14, 0.02, 2);
    FitResult fit = fit_fss_oscillation_pair(x_pts, xx_pts);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.param("S_uev") - 18.0) < 0.1);
    CHECK(fit.param("mean_energy_x_uev") == doctest::Approx(1.30e6).epsilon(1e-7));
    CHECK(fit.param("mean_energy_xx_uev") == doctest::Approx(1.31e6).epsilon(1e-7));
}

TEST_CASE("insufficient FSS span or points is rejected") {
    auto pts = fss_series(18.0, 0.0, 1.3e6, 6, 0.0, 0);
    CHECK_THROWS_AS(fit_fss_oscillation(pts, false), std::invalid_argument);
    std::vector<std::pair<double, double>> narrow;
    for (int i = 0; i < 10; ++i) {
        narrow.emplace_back(i * 0.05, 1.3e6 + std::cos(4.0 * i * 0.05));
    }
    CHECK_THROWS_AS(fit_fss_oscillation(narrow, false), std::invalid_argument);
}

TEST_CASE("damped cosine round trip") {
    CoincidenceHistogram h = damped_cosine_histogram(
        225.0, 0.3, 40.0, 55.0, 900.0, 4.0, 16.0, 0.0, 90);
    FitResult fit = fit_damped_cosine(h);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.param("period_ps") - 225.0) < 1.0);
    CHECK(fit.param("phase") == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(fit.param("decay_time_ps") == doctest::Approx(900.0).epsilon(1e-2));
}

TEST_CASE("damped cosine fit is translation covariant") {
    CoincidenceHistogram h = damped_cosine_histogram(
        225.0, 0.3, 40.0, 55.0, 900.0, 4.0, 16.0, 0.0, 90);
    CoincidenceHistogram shifted = h;
    shifted.bin_start_ps += 50.0;
    for (std::size_t i = 0; i < shifted.counts.size(); ++i) {
        double tau = shifted.bin_center(i);
        shifted.counts[i] =
            std::exp(-tau / 900.0) *
                (55.0 + 40.0 * std::cos(2.0 * kPi * (tau - 50.0) / 225.0 + 0.3)) +
            4.0;
    }
    FitResult a = fit_damped_cosine(h);
    FitResult b = fit_damped_cosine(shifted);
    CHECK(std::abs(a.param("period_ps") - b.param("period_ps")) < 1e-6);
    CHECK(std::abs(a.param("decay_time_ps") - b.param("decay_time_ps")) < 1e-3);
    double expected_shift = -2.0 * kPi * 50.0 / 225.0;
    double dphi = std::remainder(b.param("phase") - a.param("phase") - expected_shift,
                                 2.0 * kPi);
    CHECK(std::abs(dphi) < 1e-6);
}

TEST_CASE("Lorentzian fit is translation covariant in the axis") {
    Spectrum s;
    s.axis = Spectrum::Axis::energy_uev;
    for (int i = 0; i <= 100; ++i) {
        double x = -50.0 + i;
        s.x.push_back(1000.0 + x);
        s.intensity.push_back(700.0 * 16.0 / (x * x + 16.0) + 3.0);
    }
    Spectrum shifted = s;
    for (double& x : shifted.x) x += 250.0;

    FitResult a = fit_lorentzian(s);
    FitResult b = fit_lorentzian(shifted);
    CHECK(b.param("center_uev") - a.param("center_uev") ==
          doctest::Approx(250.0).epsilon(1e-8));
    CHECK(b.param("fwhm_uev") == doctest::Approx(a.param("fwhm_uev")).epsilon(1e-8));
    CHECK(b.param("amplitude") == doctest::Approx(a.param("amplitude")).epsilon(1e-8));
}

TEST_CASE("FSS fit is translation covariant in the angle") {
    auto pts = fss_series(18.0, 0.4, 1.3e6, 16, 0.0, 0);
    auto shifted = pts;
    for (auto& [theta, e] : shifted) theta += 0.2;
    FitResult a = fit_fss_oscillation(pts, false);
    FitResult b = fit_fss_oscillation(shifted, false);
    CHECK(std::abs(a.param("S_uev") - b.param("S_uev")) < 1e-8);
    double dphi =
        std::remainder(b.param("phase0") - a.param("phase0") + 4.0 * 0.2, 2.0 * kPi);
    CHECK(std::abs(dphi) < 1e-8);
}

TEST_CASE("period and FSS amplitude satisfy the phase-evolution identity") {
    // Self-consistent synthetic pair: an 18 ueV splitting and a histogram
    // oscillating at 2 pi hbar / 18.
    double s_true = 18.0;
    double period_true = 2.0 * kPi * kHbarUevPs / s_true;
    FitResult fss = fit_fss_oscillation(fss_series(s_true, 0.2, 1.3e6, 20, 0.05, 3),
                                        true);
    CoincidenceHistogram h = damped_cosine_histogram(
        period_true, 0.0, 40.0, 55.0, 900.0, 4.0, 16.0, 0.0, 90);
    Rng rng(4);
    for (double& c : h.counts) c += rng.normal(0.5);
    FitResult osc = fit_damped_cosine(h);
    REQUIRE(fss.converged);
    REQUIRE(osc.converged);

    double period_from_fss = 2.0 * kPi * kHbarUevPs / fss.param("S_uev");
    double sigma = std::hypot(
        osc.stderr_of("period_ps"),
        period_from_fss / fss.param("S_uev") * fss.stderr_of("S_uev"));
    CHECK(std::abs(osc.param("period_ps") - period_from_fss) <
          3.0 * sigma + 0.05);
}
