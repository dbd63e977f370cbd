#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "maclab/config.hpp"
#include "maclab/rng.hpp"

namespace maclab {

// Setup for the finite-length achievability bounds. Noise is normalized to
// sigma2 = 1 (N0 = 2); the SNR enters through P = Eb*k/n and P' in (0, P).
struct FiniteBoundConfig {
    SystemConfig cfg;        // n, L, k, alpha, Eb with sigma2 = 1
    ActivityModel activity;  // distribution of Ka on [0 : L]
    long long kl = 0, ku = 0;
    long long rl = 0, ru = 0;
    double pprime = 0.0;     // resolved P'

    double P() const { return cfg.P(); }

    void validate() const {
        if (cfg.sigma2 != 1.0)
            throw std::invalid_argument("FiniteBoundConfig: bounds assume sigma2 = 1");
        if (kl < 0 || kl > ku || ku > cfg.L)
            throw std::invalid_argument("FiniteBoundConfig: need 0 <= kl <= ku <= L");
        if (rl < 0 || ru < 0) throw std::invalid_argument("FiniteBoundConfig: radii must be >= 0");
        if (!(pprime > 0.0 && pprime < P()))
            throw std::invalid_argument("FiniteBoundConfig: P' must lie in (0, P)");
    }
};

struct BoundTriple {
    double md = 0.0, fa = 0.0, aue = 0.0;
    double combined() const { return std::max(md, fa) + aue; }
};

// p~ = P(Ka outside [kl:ku]) + E[Ka] * Gamma(n/2, nP/(2P')) / Gamma(n/2).
double compute_tilde_p(const FiniteBoundConfig& fbc);

// E0(rho, rho1) maximized over lambda (log-stretched scan + golden refinement).
double compute_E0(double rho, double rho1, long long t, long long that,
                  const FiniteBoundConfig& fbc, long long ka, long long kap);

// p(t, t^) = exp(-n/2 E(t,t^)) clipped to [0,1].
double compute_p_t_that(long long t, long long that, const FiniteBoundConfig& fbc, long long ka,
                        long long kap);

// Likelihood-test bound on P(Ka' = kap | Ka = ka); 1 when kl = ku.
double compute_xi(long long ka, long long kap, const FiniteBoundConfig& fbc);

// (ln nu(tmin, psi), ln nu(tmin)) for the combinatorial weights of Theorem 1.
std::pair<double, double> compute_nu(long long tmin, long long psi, long long Rcal, double M);

// The five nested sums of Theorem 1; O(L^5) cost, guarded at L <= 200.
BoundTriple compute_bound_triple(const FiniteBoundConfig& fbc);

// Corollary-1 error floors at the configured P'.
BoundTriple compute_error_floors(const FiniteBoundConfig& fbc);

// Golden-section optimization of P' over (0, P) for the combined metric;
// returns the optimized bounds and stores the chosen P' in fbc.
BoundTriple optimize_pprime(FiniteBoundConfig& fbc, double rel_tol = 5e-3);

// ---------------------------------------------------------------- ML oracle

// Tiny sourced-GMAC instance with truncated Gaussian codebooks, for the
// exhaustive maximum-likelihood decoder used as a semantic oracle.
struct TinyInstance {
    std::vector<Eigen::MatrixXd> codebooks;  // L of (n x M)
    Eigen::VectorXd y;
    std::vector<int> sent;  // -1 silent, else codeword index
    long long Ka = 0;
};

TinyInstance sample_tiny_instance(const FiniteBoundConfig& fbc, Rng& rng);

// Exhaustive combinatorial least squares within the decoding radii around the
// ML activity-count estimate. Gated to L <= 8, M <= 4.
std::vector<int> ml_oracle_decode(const TinyInstance& inst, const FiniteBoundConfig& fbc);

}  // namespace maclab
