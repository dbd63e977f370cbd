#pragma once

#include <Eigen/Dense>
#include <vector>

#include "maclab/cdma.hpp"
#include "maclab/config.hpp"
#include "maclab/coupling.hpp"
#include "maclab/rng.hpp"

namespace maclab {

// Matrix state evolution for the CDMA scheme. At iteration t, Phi[r] and T[c]
// are built from Psi[c]; the next Psi is the denoiser error covariance.
struct MatrixSEState {
    int t = 0;
    std::vector<Eigen::MatrixXd> Phi;  // R of k x k
    std::vector<Eigen::MatrixXd> T;    // C of k x k
    std::vector<Eigen::MatrixXd> Psi;  // C of k x k (current iteration's input)
};

struct MatrixSETrace {
    std::vector<std::vector<Eigen::MatrixXd>> Phi;  // [t][r]
    std::vector<std::vector<Eigen::MatrixXd>> T;    // [t][c]
    std::vector<std::vector<Eigen::MatrixXd>> Psi;  // [t][c], Psi[0] = alpha Eb I
    int t_final = 0;
};

struct MatrixSEOptions {
    int mc_samples = 200000;
    double tol = 1e-8;
    int t_max = 200;
    // predict_errors: doubles samples until rel std err of combined < target
    double predict_rel_se = 0.02;
    int predict_samples = 1 << 20;
    int predict_max_samples = 1 << 23;
};

MatrixSEState matrix_se_init(const SystemConfig& cfg, const CouplingSpec& spec);

// One SE step: fills Phi/T at state.t and advances Psi via common-random-number
// Monte Carlo over (X, G). Psi estimates are symmetrized and PSD-clipped.
MatrixSEState matrix_se_step(const MatrixSEState& state, const SystemConfig& cfg,
                             const CouplingSpec& spec, const DenoiserKind& kind, int mc_samples,
                             Rng& rng);

// Iterates to the trace(Psi) stopping rule; throws on divergence.
MatrixSETrace se_fixed_point(const SystemConfig& cfg, const CouplingSpec& spec,
                             const DenoiserKind& kind, const MatrixSEOptions& opts, Rng& rng);

struct PredictedErrors {
    ErrorTriple mean;
    ErrorTriple std_err;
    long long samples = 0;
};

// Theorem-4 error probabilities at iteration t of the trace, by Monte Carlo
// over (X_a, G_c).
PredictedErrors predict_errors_detailed(const MatrixSETrace& se, int t, const SystemConfig& cfg,
                                        const DenoiserKind& kind, const MatrixSEOptions& opts,
                                        Rng& rng);

ErrorTriple predict_errors(const MatrixSETrace& se, int t, const SystemConfig& cfg,
                           const DenoiserKind& kind, const MatrixSEOptions& opts, Rng& rng);

}  // namespace maclab
