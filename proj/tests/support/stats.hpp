#pragma once

// Small statistics helpers for the test suites: regularized incomplete
// gamma function and the chi-squared tail probability built on it.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace teststat {

// Regularized lower incomplete gamma P(a, x) by series expansion.
inline double gamma_p_series(double a, double x) {
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 1; n < 500; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q domain");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

// P(Chi2_dof >= chi2)
inline double chi2_pvalue(double chi2, double dof) {
    return gamma_q(0.5 * dof, 0.5 * chi2);
}

// Goodness-of-fit p-value with bins pooled left to right until each pooled
// cell expects at least 10 counts.
inline double pooled_chi2_pvalue(const std::vector<double>& observed,
                                 const std::vector<double>& expected) {
    if (observed.size() != expected.size())
        throw std::invalid_argument("pooled_chi2: size mismatch");
    std::vector<double> obs_pool, exp_pool;
    double o = 0.0, e = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o += observed[i];
        e += expected[i];
        if (e >= 10.0) {
            obs_pool.push_back(o);
            exp_pool.push_back(e);
            o = e = 0.0;
        }
    }
    if (e > 0.0 && !exp_pool.empty()) {
        obs_pool.back() += o;
        exp_pool.back() += e;
    }
    if (exp_pool.empty()) throw std::invalid_argument("pooled_chi2: no mass");
    double chi2 = 0.0;
    for (std::size_t i = 0; i < obs_pool.size(); ++i) {
        double d = obs_pool[i] - exp_pool[i];
        chi2 += d * d / exp_pool[i];
    }
    return chi2_pvalue(chi2, static_cast<double>(obs_pool.size()));
}

}  // namespace teststat
