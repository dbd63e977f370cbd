#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "maclab/config.hpp"
#include "maclab/coupling.hpp"

namespace maclab {

enum class PotentialKind { bayes, marginal };

inline const char* to_string(PotentialKind k) {
    return k == PotentialKind::bayes ? "bayes" : "marginal";
}

struct PotentialOptions {
    int grid = 240;               // log-spaced psi grid points on [E*1e-7, E]
    double refine_tol = 1e-9;     // golden-section tolerance (absolute, in psi/E)
    double min_merge_tol = 1e-9;  // near-global minima window on F values
    int mc_samples = 200000;      // bayes-kind mutual information MC
    double mc_se_target = 1e-4;   // nats; doubles samples until reached
    int max_mc_samples = 1 << 22;
    std::uint64_t seed = 1;
    int threads = 1;
};

// Monte Carlo evaluator for the sectionwise mutual information (bayes kind).
// Keeps one sample block so evaluations share common random numbers across
// tau, psi grids and SNR sweeps.
class BayesMiSampler {
public:
    BayesMiSampler(int k, const PotentialOptions& opts);
    // I(xsec; s_tau) in nats for the section channel s = xsec + sqrt(tau) z.
    double eval(double tau, double E, double alpha) const;
    double last_std_err() const { return last_se_; }
    int samples() const { return S_; }
    void ensure_precision(double tau, double E, double alpha);

private:
    int M_;
    int S_;
    PotentialOptions opts_;
    Eigen::MatrixXd Z_;  // M x S standard normals
    mutable double last_se_ = 0.0;
};

// Entrywise mutual information (marginal kind) by Gauss-Hermite quadrature.
double marginal_mutual_info(double tau, double E, double alpha, double M);

// Sectionwise/entrywise mutual information dispatch; bayes kind requires k <= 12.
double mutual_info(PotentialKind kind, double tau, const SystemConfig& cfg,
                   const PotentialOptions& opts, const BayesMiSampler* sampler = nullptr);

// Potential value F(mu, sigma2, psi) with tau = sigma2 + mu * psi.
double potential(PotentialKind kind, double psi, double mu, double sigma2,
                 const SystemConfig& cfg, const PotentialOptions& opts,
                 const BayesMiSampler* sampler = nullptr);

struct Minimizer {
    double psi = 0.0;
    double value = 0.0;
};

// All local minimizers of F over the psi grid (refined); includes endpoints
// when they are local minima.
std::vector<Minimizer> local_minimizers(PotentialKind kind, double mu, double sigma2,
                                        const SystemConfig& cfg, const PotentialOptions& opts,
                                        const BayesMiSampler* sampler = nullptr);

// Largest psi among global minimizers (ties resolved within min_merge_tol).
double largest_minimizer(PotentialKind kind, double mu, double sigma2,
                         const SystemConfig& cfg, const PotentialOptions& opts,
                         const BayesMiSampler* sampler = nullptr);

struct PotentialEval {
    PotentialKind kind = PotentialKind::marginal;
    double mu = 0.0, sigma2 = 1.0;
    std::vector<double> psi_grid, values;
    double minimizer = 0.0;       // largest global minimizer
    double epsilon_slack = 0.0;   // Lemma-3 slack
    double delta = 0.0;           // Theorem-2 slack
    double tau_bar = 0.0;         // sigma2 + mu * (minimizer + epsilon)
};

PotentialEval evaluate_potential(PotentialKind kind, double mu, double sigma2,
                                 const SystemConfig& cfg, const PotentialOptions& opts,
                                 const BayesMiSampler* sampler = nullptr);

// Hard-decision error probabilities of the section-MAP rule at effective noise
// tau (Theorem-2 closed forms). Valid for alpha in (0,1).
double prob_hard_zero_given_active(double tau, const SystemConfig& cfg);
double prob_hard_wrong_given_active(double tau, const SystemConfig& cfg);
double prob_hard_nonzero_given_silent(double tau, const SystemConfig& cfg);

// (epsMD, epsFA, epsAUE) at effective noise tau; alpha in (0,1).
ErrorTriple asymptotic_error_triple(double tau, const SystemConfig& cfg);

// PUPE bound for alpha = 1: 1 - E_z[Phi(z + sqrt(E/tau))^(M-1)].
double pupe_alpha1(double tau, const SystemConfig& cfg);

// Combined bound max{MD,FA}+AUE (or PUPE at alpha=1) at user density mu.
// theta = 1 gives the large-(omega,Lambda) limit; finite (omega,Lambda)
// evaluation passes theta = 1 + (omega-1)/Lambda and is heuristic.
double combined_bound_at_mu(PotentialKind kind, double mu, const SystemConfig& cfg,
                            const PotentialOptions& opts, double theta = 1.0,
                            BayesMiSampler* sampler = nullptr);

struct RegionPoint {
    double ebn0_db = 0.0;
    double mu_a_max = 0.0;  // 0 when the target is unreachable at this SNR
    bool bracketed = true;  // false when mu_hi still meets the target
};

// Largest mu_a = alpha*mu meeting the target combined error, per Eb/N0 point.
std::vector<RegionPoint> sweep_achievable_region(const SystemConfig& cfg_template,
                                                 double target_error,
                                                 const std::vector<double>& ebn0_grid_db,
                                                 double mu_lo, double mu_hi,
                                                 PotentialKind kind,
                                                 const PotentialOptions& opts,
                                                 double theta = 1.0);

}  // namespace maclab
