#pragma once

#include "qdent/cascade.hpp"
#include "qdent/polarization.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qdent {

using SettingPair = std::pair<AnalyzerSetting, AnalyzerSetting>;

struct TomographyRecord {
    AnalyzerSetting setting_xx;
    AnalyzerSetting setting_x;
    long long counts = 0;
};

// 16 projective coincidence counts. Construction checks informational
// completeness (the induced projectors must span the space of Hermitian
// 4x4 matrices).
struct TomographyInput {
    std::array<TomographyRecord, 16> records;
    std::string acquisition_note;

    static TomographyInput make(const std::vector<TomographyRecord>& records,
                                std::string note = {});
};

// Canonical informationally complete product-projection set over
// {H,V,D,R,L}, with concrete waveplate angles realizing each label.
std::array<SettingPair, 16> standard_settings();

// Forward model for one record: Tr(rho * P_xx (x) P_x).
double predicted_probability(const DensityMatrix& rho, const SettingPair& pair);

struct LinearReconstruction {
    Mat4c rho;               // Hermitian, possibly non-PSD
    double min_eigenvalue;   // < 0 flags an unphysical inversion
    double n_tot;            // fitted per-setting exposure
};

// Linear inversion of the 16 counts; the exposure is eliminated by solving
// for the unnormalized matrix and rescaling to unit trace.
LinearReconstruction linear_reconstruct(const TomographyInput& input);

// 16 real numbers parameterizing a complex lower-triangular T; any value
// maps to the automatically physical rho = T^dag T / Tr(T^dag T).
struct CholeskyParams {
    std::array<double, 16> t{};

    Mat4c matrix_T() const;
    Mat4c unnormalized() const;  // T^dag T
    DensityMatrix density() const;

    // T with T^dag T = m (+ tiny diagonal regularization if singular).
    static CholeskyParams from_unnormalized(const Mat4c& m);
};

struct MleOptions {
    int max_iter = 1000;
    double tol = 1e-13;       // relative NLL change per accepted step
    std::uint64_t seed = 0;   // perturbation seed for extra starts
    int n_starts = 4;         // linear seed + seeded perturbations
};

struct MleReport {
    bool converged = false;
    int iterations = 0;
    double nll = 0.0;
    double grad_norm = 0.0;
    double n_tot = 0.0;  // fitted shared exposure
    int best_start = 0;
};

// Maximum-likelihood reconstruction: minimizes the Poisson negative
// log-likelihood over CholeskyParams with damped Fisher scoring, seeded
// from the eigenvalue-clipped linear inversion plus perturbed restarts.
// Non-convergence is reported, never thrown; all-zero counts are rejected.
std::pair<DensityMatrix, MleReport> mle_reconstruct(const TomographyInput& input,
                                                    const MleOptions& options = {});

struct NamedReference {
    std::string name;
    Vec4c state;
};

struct MetricStat {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;
};

struct ErrorBarReport {
    std::vector<MetricStat> fidelities;  // one per requested reference
    MetricStat concurrence;
    MetricStat purity;
    int n_resamples = 0;
    int n_failed = 0;
};

// Poisson-resamples the counts, reruns the MLE per resample (resamples are
// independent and run in parallel, merged by index) and reports sample
// standard deviations. Deterministic per seed; fails if more than 10% of
// resamples fail.
ErrorBarReport error_bars(const TomographyInput& input, int n_resamples,
                          std::uint64_t seed,
                          const std::vector<NamedReference>& references,
                          const MleOptions& options = {});

}  // namespace qdent
