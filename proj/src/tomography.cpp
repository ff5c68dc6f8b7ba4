#include "qdent/tomography.hpp"

#include "qdent/metrics.hpp"
#include "qdent/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qdent {

namespace {

constexpr double kProbFloor = 1e-12;

// Real 16-parameter coordinates of a Hermitian 4x4 matrix: 4 diagonal
// entries, then (re, im) for the 6 upper-triangle entries in row order.
constexpr int kOffDiagRows[6] = {0, 0, 0, 1, 1, 2};
constexpr int kOffDiagCols[6] = {1, 2, 3, 2, 3, 3};

Eigen::Matrix<double, 16, 16> response_matrix(const std::array<Mat4c, 16>& projectors) {
    Eigen::Matrix<double, 16, 16> a;
    for (int k = 0; k < 16; ++k) {
        const Mat4c& p = projectors[k];
        for (int i = 0; i < 4; ++i) a(k, i) = p(i, i).real();
        for (int m = 0; m < 6; ++m) {
            Complex pji = p(kOffDiagCols[m], kOffDiagRows[m]);
            a(k, 4 + 2 * m) = 2.0 * pji.real();
            a(k, 5 + 2 * m) = -2.0 * pji.imag();
        }
    }
    return a;
}

Mat4c hermitian_from_coords(const Eigen::Matrix<double, 16, 1>& x) {
    Mat4c h = Mat4c::Zero();
    for (int i = 0; i < 4; ++i) h(i, i) = x(i);
    for (int m = 0; m < 6; ++m) {
        Complex v(x(4 + 2 * m), x(5 + 2 * m));
        h(kOffDiagRows[m], kOffDiagCols[m]) = v;
        h(kOffDiagCols[m], kOffDiagRows[m]) = std::conj(v);
    }
    return h;
}

std::array<Mat4c, 16> input_projectors(const TomographyInput& input) {
    std::array<Mat4c, 16> out;
    for (int k = 0; k < 16; ++k) {
        out[k] = two_photon_projector(
            analyzer_projection_state(input.records[k].setting_xx),
            analyzer_projection_state(input.records[k].setting_x));
    }
    return out;
}

std::array<Vec4c, 16> input_projection_states(const TomographyInput& input) {
    std::array<Vec4c, 16> out;
    for (int k = 0; k < 16; ++k) {
        out[k] = kron(analyzer_projection_state(input.records[k].setting_xx).amp,
                      analyzer_projection_state(input.records[k].setting_x).amp);
    }
    return out;
}

void check_complete(const std::array<Mat4c, 16>& projectors) {
    Eigen::JacobiSVD<Eigen::Matrix<double, 16, 16>> svd(response_matrix(projectors));
    double cond = svd.singularValues()(0) / svd.singularValues()(15);
    if (!std::isfinite(cond) || cond > 1e12) {
        throw std::invalid_argument(
            "analyzer settings are degenerate: projectors do not span the "
            "Hermitian matrix space");
    }
}

}  // namespace

TomographyInput TomographyInput::make(const std::vector<TomographyRecord>& records,
                                      std::string note) {
    if (records.size() != 16) {
        throw std::invalid_argument("tomography input needs exactly 16 records");
    }
    TomographyInput input;
    std::copy(records.begin(), records.end(), input.records.begin());
    input.acquisition_note = std::move(note);
    for (const auto& r : input.records) {
        if (r.counts < 0) throw std::invalid_argument("counts must be non-negative");
    }
    check_complete(input_projectors(input));
    return input;
}

std::array<SettingPair, 16> standard_settings() {
    const char* labels[16] = {"HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
                              "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL"};
    std::array<SettingPair, 16> out;
    for (int k = 0; k < 16; ++k) {
        out[k] = {canonical_setting(labels[k][0]), canonical_setting(labels[k][1])};
    }
    return out;
}

double predicted_probability(const DensityMatrix& rho, const SettingPair& pair) {
    return projection_probability(
        rho, two_photon_projector(analyzer_projection_state(pair.first),
                                  analyzer_projection_state(pair.second)));
}

LinearReconstruction linear_reconstruct(const TomographyInput& input) {
    std::array<Mat4c, 16> projectors = input_projectors(input);
    Eigen::Matrix<double, 16, 16> a = response_matrix(projectors);
    Eigen::Matrix<double, 16, 1> n;
    for (int k = 0; k < 16; ++k) {
        n(k) = static_cast<double>(input.records[k].counts);
    }

    Eigen::FullPivLU<Eigen::Matrix<double, 16, 16>> lu(a);
    if (!lu.isInvertible()) {
        throw std::invalid_argument("degenerate settings: singular response matrix");
    }
    Eigen::Matrix<double, 16, 1> y = lu.solve(n);
    Mat4c unnormalized = hermitian_from_coords(y);

    double trace = unnormalized.trace().real();
    if (!(trace > 0.0)) {
        throw std::invalid_argument("linear inversion produced non-positive exposure");
    }

    LinearReconstruction out;
    out.rho = unnormalized / trace;
    out.n_tot = trace;
    Eigen::SelfAdjointEigenSolver<Mat4c> es(out.rho, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    return out;
}

Mat4c CholeskyParams::matrix_T() const {
    Mat4c m = Mat4c::Zero();
    m(0, 0) = t[0];
    m(1, 1) = t[1];
    m(2, 2) = t[2];
    m(3, 3) = t[3];
    m(1, 0) = Complex(t[4], t[5]);
    m(2, 0) = Complex(t[6], t[7]);
    m(2, 1) = Complex(t[8], t[9]);
    m(3, 0) = Complex(t[10], t[11]);
    m(3, 1) = Complex(t[12], t[13]);
    m(3, 2) = Complex(t[14], t[15]);
    return m;
}

Mat4c CholeskyParams::unnormalized() const {
    Mat4c m = matrix_T();
    return m.adjoint() * m;
}

DensityMatrix CholeskyParams::density() const {
    Mat4c m = unnormalized();
    double tr = m.trace().real();
    if (!(tr > 0.0)) {
        return Mat4c::Identity() * 0.25;
    }
    m /= tr;
    return 0.5 * (m + m.adjoint());
}

CholeskyParams CholeskyParams::from_unnormalized(const Mat4c& m) {
    // Reversal trick: with P the index-reversing permutation and
    // P m P = L L^dag, the matrix T = P L^dag P is lower triangular
    // and satisfies T^dag T = m.
    Mat4c p = Mat4c::Zero();
    for (int i = 0; i < 4; ++i) p(i, 3 - i) = 1.0;

    Mat4c flipped = p * m * p;
    double reg = std::max(m.trace().real(), 1.0) * 1e-12;
    Eigen::LLT<Mat4c> llt(flipped + reg * Mat4c::Identity());
    while (llt.info() != Eigen::Success && reg < 1.0) {
        reg *= 1e3;
        llt.compute(flipped + reg * Mat4c::Identity());
    }
    Mat4c lower = llt.matrixL();
    Mat4c t_mat = p * lower.adjoint() * p;

    CholeskyParams out;
    out.t[0] = t_mat(0, 0).real();
    out.t[1] = t_mat(1, 1).real();
    out.t[2] = t_mat(2, 2).real();
    out.t[3] = t_mat(3, 3).real();
    out.t[4] = t_mat(1, 0).real();
    out.t[5] = t_mat(1, 0).imag();
    out.t[6] = t_mat(2, 0).real();
    out.t[7] = t_mat(2, 0).imag();
    out.t[8] = t_mat(2, 1).real();
    out.t[9] = t_mat(2, 1).imag();
    out.t[10] = t_mat(3, 0).real();
    out.t[11] = t_mat(3, 0).imag();
    out.t[12] = t_mat(3, 1).real();
    out.t[13] = t_mat(3, 1).imag();
    out.t[14] = t_mat(3, 2).real();
    out.t[15] = t_mat(3, 2).imag();
    return out;
}

namespace {

// (row, col, imaginary?) of T touched by each of the 16 parameters.
struct ParamSlot {
    int row;
    int col;
    bool imag;
};

constexpr ParamSlot kSlots[16] = {
    {0, 0, false}, {1, 1, false}, {2, 2, false}, {3, 3, false},
    {1, 0, false}, {1, 0, true},  {2, 0, false}, {2, 0, true},
    {2, 1, false}, {2, 1, true},  {3, 0, false}, {3, 0, true},
    {3, 1, false}, {3, 1, true},  {3, 2, false}, {3, 2, true},
};

struct NllState {
    double nll = 0.0;
    Eigen::Matrix<double, 16, 1> grad = Eigen::Matrix<double, 16, 1>::Zero();
    Eigen::Matrix<double, 16, 16> fisher = Eigen::Matrix<double, 16, 16>::Zero();
};

// Poisson negative log-likelihood sum_k [p_k - n_k ln p_k] with predicted
// counts p_k = ||T w_k||^2, plus gradient and the Fisher (expected Hessian)
// approximation used for scoring steps.
NllState evaluate_nll(const CholeskyParams& params, const std::array<Vec4c, 16>& states,
                      const std::array<double, 16>& counts, bool with_derivatives) {
    Mat4c t_mat = params.matrix_T();
    NllState out;
    for (int k = 0; k < 16; ++k) {
        Vec4c y = t_mat * states[k];
        double pred = y.squaredNorm();
        double safe = std::max(pred, kProbFloor);
        out.nll += pred - counts[k] * std::log(safe);
        if (!with_derivatives) continue;

        Eigen::Matrix<double, 16, 1> dp;
        for (int j = 0; j < 16; ++j) {
            Complex z = std::conj(y(kSlots[j].row)) * states[k](kSlots[j].col);
            dp(j) = kSlots[j].imag ? -2.0 * z.imag() : 2.0 * z.real();
        }
        double dldp = pred > kProbFloor ? 1.0 - counts[k] / pred : 1.0;
        out.grad += dldp * dp;
        out.fisher += (dp * dp.transpose()) / safe;
    }
    return out;
}

struct StartResult {
    CholeskyParams params;
    MleReport report;
};

StartResult run_start(CholeskyParams params, const std::array<Vec4c, 16>& states,
                      const std::array<double, 16>& counts, const MleOptions& options) {
    NllState state = evaluate_nll(params, states, counts, true);
    double lambda = 1e-3;
    bool converged = false;
    int iter = 0;

    for (; iter < options.max_iter && !converged; ++iter) {
        Eigen::Matrix<double, 16, 16> damped = state.fisher;
        for (int j = 0; j < 16; ++j) {
            damped(j, j) += lambda * std::max(state.fisher(j, j), 1e-12);
        }

        bool accepted = false;
        for (int tries = 0; tries < 50; ++tries) {
            Eigen::Matrix<double, 16, 1> step =
                damped.ldlt().solve(-state.grad);
            CholeskyParams trial = params;
            for (int j = 0; j < 16; ++j) trial.t[j] += step(j);

            NllState trial_state = evaluate_nll(trial, states, counts, true);
            if (trial_state.nll <= state.nll) {
                double rel_change =
                    (state.nll - trial_state.nll) / (std::abs(state.nll) + 1.0);
                double param_scale = 1.0;
                for (double v : params.t) param_scale += v * v;
                bool tiny_step = step.squaredNorm() < 1e-24 * param_scale;
                params = trial;
                state = trial_state;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel_change < options.tol || tiny_step) converged = true;
                break;
            }
            lambda *= 8.0;
            for (int j = 0; j < 16; ++j) {
                damped(j, j) = state.fisher(j, j) +
                               lambda * std::max(state.fisher(j, j), 1e-12);
            }
        }
        if (!accepted) {
            // No measurable descent left; call it converged if the Newton
            // decrement says the remaining improvement is negligible.
            Eigen::Matrix<double, 16, 16> reg = state.fisher;
            for (int j = 0; j < 16; ++j) reg(j, j) += 1e-12;
            double decrement = 0.5 * state.grad.dot(reg.ldlt().solve(state.grad));
            converged = decrement < 1e-3;
            break;
        }
    }

    StartResult out;
    out.params = params;
    out.report.converged = converged;
    out.report.iterations = iter;
    out.report.nll = state.nll;
    out.report.grad_norm = state.grad.norm();
    out.report.n_tot = params.unnormalized().trace().real();
    return out;
}

}  // namespace

std::pair<DensityMatrix, MleReport> mle_reconstruct(const TomographyInput& input,
                                                    const MleOptions& options) {
    std::array<Vec4c, 16> states = input_projection_states(input);
    std::array<double, 16> counts;
    double total = 0.0;
    for (int k = 0; k < 16; ++k) {
        counts[k] = static_cast<double>(input.records[k].counts);
        total += counts[k];
    }
    if (total <= 0.0) {
        throw std::invalid_argument("all-zero counts cannot be reconstructed");
    }

    // Seed: eigenvalue-clipped linear inversion, rescaled to the fitted
    // exposure so the Cholesky factor starts near the right overall scale.
    // Count vectors whose inversion has no positive exposure fall back to a
    // maximally mixed seed; only all-zero inputs are rejected outright.
    Mat4c seed_rho;
    double n_tot_guess = total / 4.0;
    try {
        LinearReconstruction lin = linear_reconstruct(input);
        Eigen::SelfAdjointEigenSolver<Mat4c> es(lin.rho);
        Eigen::Vector4d clipped = es.eigenvalues().cwiseMax(1e-6);
        seed_rho = es.eigenvectors() * clipped.asDiagonal() *
                   es.eigenvectors().adjoint();
        seed_rho *= lin.n_tot / seed_rho.trace().real();
        n_tot_guess = lin.n_tot;
    } catch (const std::invalid_argument&) {
        seed_rho = 0.25 * n_tot_guess * Mat4c::Identity();
    }
    CholeskyParams seed = CholeskyParams::from_unnormalized(seed_rho);

    double scale = std::sqrt(std::max(n_tot_guess, 1.0) / 4.0);
    StartResult best;
    bool have_best = false;
    for (int s = 0; s < std::max(1, options.n_starts); ++s) {
        CholeskyParams start = seed;
        if (s > 0) {
            Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(s)));
            for (int j = 0; j < 16; ++j) {
                start.t[j] = seed.t[j] * (1.0 + 0.2 * rng.normal(1.0)) +
                             0.1 * scale * rng.normal(1.0);
            }
        }
        StartResult r = run_start(start, states, counts, options);
        if (!have_best || r.report.nll < best.report.nll) {
            best = r;
            best.report.best_start = s;
            have_best = true;
        }
    }

    return {best.params.density(), best.report};
}

ErrorBarReport error_bars(const TomographyInput& input, int n_resamples,
                          std::uint64_t seed,
                          const std::vector<NamedReference>& references,
                          const MleOptions& options) {
    if (n_resamples < 100) {
        throw std::invalid_argument("n_resamples must be >= 100");
    }

    const std::size_t n_refs = references.size();
    std::vector<std::vector<double>> fid(n_refs);
    std::vector<double> conc(n_resamples, 0.0), pur(n_resamples, 0.0);
    std::vector<char> ok(n_resamples, 0);
    for (auto& f : fid) f.assign(n_resamples, 0.0);

#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < n_resamples; ++r) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
        std::vector<TomographyRecord> resampled(input.records.begin(),
                                                input.records.end());
        for (auto& rec : resampled) {
            rec.counts = rng.poisson(static_cast<double>(rec.counts));
        }
        try {
            TomographyInput in = TomographyInput::make(resampled);
            MleOptions opt = options;
            opt.seed = mix_seed(seed, 0x5EED0000ULL + static_cast<std::uint64_t>(r));
            auto [rho, report] = mle_reconstruct(in, opt);
            for (std::size_t i = 0; i < n_refs; ++i) {
                fid[i][r] = fidelity_to_pure(rho, references[i].state);
            }
            conc[r] = concurrence(rho);
            pur[r] = purity(rho);
            ok[r] = 1;
        } catch (const std::exception&) {
            ok[r] = 0;
        }
    }

    int n_ok = 0;
    for (char c : ok) n_ok += c;
    if (n_ok < n_resamples - n_resamples / 10) {
        throw std::runtime_error("error_bars: more than 10% of resamples failed");
    }

    auto stat = [&](const std::vector<double>& v, const std::string& name) {
        double mean = 0.0;
        for (int r = 0; r < n_resamples; ++r) {
            if (ok[r]) mean += v[r];
        }
        mean /= n_ok;
        double var = 0.0;
        for (int r = 0; r < n_resamples; ++r) {
            if (ok[r]) var += (v[r] - mean) * (v[r] - mean);
        }
        var = n_ok > 1 ? var / (n_ok - 1) : 0.0;
        return MetricStat{name, mean, std::sqrt(var)};
    };

    ErrorBarReport report;
    report.n_resamples = n_resamples;
    report.n_failed = n_resamples - n_ok;
    for (std::size_t i = 0; i < n_refs; ++i) {
        report.fidelities.push_back(stat(fid[i], references[i].name));
    }
    report.concurrence = stat(conc, "concurrence");
    report.purity = stat(pur, "purity");
    return report;
}

}  // namespace qdent
