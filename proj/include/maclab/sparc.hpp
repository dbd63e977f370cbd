#pragma once

#include <Eigen/Dense>
#include <vector>

#include "maclab/config.hpp"
#include "maclab/coupling.hpp"
#include "maclab/rng.hpp"

namespace maclab {

enum class SparcDenoiser { bayes, marginal };

inline const char* to_string(SparcDenoiser k) {
    return k == SparcDenoiser::bayes ? "bayes" : "marginal";
}

// Section-sparse instance: y = A x + eps with L sections of size M = 2^k.
struct SparcInstance {
    Eigen::MatrixXd A;        // n x (L*M)
    Eigen::VectorXd x;        // L*M
    Eigen::VectorXd y;        // n
    std::vector<int> sent;    // per section: -1 silent, else codeword index
    long long Ka = 0;
};

SparcInstance sample_sparc_instance(const SystemConfig& cfg, const CouplingSpec& spec, Rng& rng);

// Conditional-mean denoiser for one section given effective noise tau.
Eigen::VectorXd sparc_denoise_section(SparcDenoiser kind, const Eigen::VectorXd& s, double tau,
                                      const SystemConfig& cfg);

// Exact derivative of the section denoiser with respect to s.
Eigen::MatrixXd sparc_denoise_jacobian(SparcDenoiser kind, const Eigen::VectorXd& s, double tau,
                                       const SystemConfig& cfg);

// MAP hard decision over {sqrt(E) e_j} U {0}: returns codeword index or -1.
int sparc_hard_decide(const Eigen::VectorXd& s, double tau, const SystemConfig& cfg);

// Section MMSE under the section prior at effective noise tau.
double sparc_mmse(SparcDenoiser kind, double tau, const SystemConfig& cfg, int mc_samples,
                  Rng& rng);

struct ScalarSETrace {
    std::vector<Eigen::VectorXd> phi;  // [t][r]
    std::vector<Eigen::VectorXd> tau;  // [t][c]
    std::vector<Eigen::VectorXd> psi;  // [t][c], psi[0] = E
    int t_final = 0;
};

struct ScalarSEOptions {
    double tol = 1e-8;
    int t_max = 200;
    int mc_samples = 100000;  // bayes kind only; marginal uses quadrature
};

ScalarSETrace scalar_se_run(const SystemConfig& cfg, const CouplingSpec& spec, SparcDenoiser kind,
                            const ScalarSEOptions& opts, Rng& rng);

struct SparcAmpState {
    int t = 0;
    Eigen::VectorXd x;       // current estimate x^t
    Eigen::VectorXd z;       // residual z^{t-1} entering the step
    Eigen::VectorXd s;       // effective observation s^{t-1}
    bool have_z = false;
};

SparcAmpState sparc_amp_init(const SparcInstance& inst);

// One AMP iteration: consumes SE values at state.t, produces x^{t+1}, s^t, z^t.
void sparc_amp_step(SparcAmpState& state, const SparcInstance& inst, const CouplingSpec& spec,
                    const ScalarSETrace& se, SparcDenoiser kind, const SystemConfig& cfg);

// Hard decisions for all sections from the current effective observation.
std::vector<int> sparc_amp_decide(const SparcAmpState& state, const CouplingSpec& spec,
                                  const ScalarSETrace& se, const SystemConfig& cfg);

ErrorTriple sparc_empirical_errors(const std::vector<int>& sent, const std::vector<int>& decided);

}  // namespace maclab
