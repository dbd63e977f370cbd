#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "maclab/config.hpp"
#include "maclab/coupling.hpp"
#include "maclab/rng.hpp"

namespace maclab {

enum class CdmaDenoiser { bayes, marginal, threshold };

inline const char* to_string(CdmaDenoiser k) {
    switch (k) {
        case CdmaDenoiser::bayes: return "bayes";
        case CdmaDenoiser::marginal: return "marginal";
        default: return "threshold";
    }
}

// Denoiser choice; threshold carries the activity value substituted into the
// hypothesis test (defaults to the true alpha when negative).
struct DenoiserKind {
    CdmaDenoiser kind = CdmaDenoiser::threshold;
    double alpha_hat = -1.0;

    double resolved_alpha_hat(const SystemConfig& cfg) const {
        return alpha_hat < 0.0 ? cfg.alpha : alpha_hat;
    }
};

struct CdmaInstance {
    Eigen::MatrixXd A;             // ntilde x L signature matrix
    Eigen::MatrixXd X;             // L x k signal, rows in {+-sqrt(Eb)}^k or zero
    Eigen::MatrixXd Y;             // ntilde x k observation
    std::vector<std::uint8_t> active;
    long long Ka = 0;
};

// Requires k | n, C | L, R | n/k.
CdmaInstance sample_cdma_instance(const SystemConfig& cfg, const CouplingSpec& spec, Rng& rng,
                                  int threads = 1);

// Activity test of the thresholding denoiser. alpha_star is the activity level
// above which every row is declared active.
double threshold_alpha_star(double Tbar, double Eb, int k);
bool threshold_is_active(double Y, double Tbar, double Eb, int k, double alpha_hat);

struct RowDenoise {
    Eigen::VectorXd xhat;
    Eigen::MatrixXd jacobian;
};

// Validates the covariance once and precomputes everything shared by the rows
// of a column block. Hot loops construct one context per block.
class RowDenoiserCtx {
public:
    RowDenoiserCtx(const DenoiserKind& kind, const Eigen::MatrixXd& Tc, const SystemConfig& cfg);
    ~RowDenoiserCtx();
    RowDenoiserCtx(RowDenoiserCtx&&) noexcept;
    RowDenoiserCtx(const RowDenoiserCtx&) = delete;
    RowDenoiserCtx& operator=(const RowDenoiserCtx&) = delete;

    void denoise(const Eigen::VectorXd& s, Eigen::VectorXd& xhat,
                 Eigen::MatrixXd* jacobian = nullptr) const;
    void hard_decide(const Eigen::VectorXd& s, Eigen::VectorXd& out) const;
    bool test_active(double Y) const;  // threshold kind's activity test
    double Tbar() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

RowDenoise denoise_row(const DenoiserKind& kind, const Eigen::VectorXd& s,
                       const Eigen::MatrixXd& Tc, const SystemConfig& cfg);

// Hard decision: exact MAP over the prior support for bayes (k <= 12),
// sign rule after the activity test for threshold, entrywise MAP for marginal.
Eigen::VectorXd hard_decide_row(const DenoiserKind& kind, const Eigen::VectorXd& s,
                                const Eigen::MatrixXd& Tc, const SystemConfig& cfg);

ErrorTriple empirical_errors(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xhat);

// Per-iteration SE matrices consumed by the AMP step (see matrix_se.hpp).
struct MatrixSETrace;

struct CdmaAmpState {
    int t = 0;
    Eigen::MatrixXd X;                  // X^t
    Eigen::MatrixXd Z;                  // Z^{t-1}
    Eigen::MatrixXd S;                  // S^{t-1}
    std::vector<Eigen::MatrixXd> Jbar;  // per column block, avg eta'_{t-1,c}
    std::vector<std::vector<Eigen::MatrixXd>> Qprev;  // Q^{t-1}[r][c]
    bool have_prev = false;
};

CdmaAmpState cdma_amp_init(const CdmaInstance& inst, int k);

void cdma_amp_step(CdmaAmpState& state, const CdmaInstance& inst, const CouplingSpec& spec,
                   const MatrixSETrace& se, const DenoiserKind& kind, const SystemConfig& cfg,
                   int threads = 1);

// Hard decisions from the current effective observation S^{t-1}.
Eigen::MatrixXd cdma_amp_decide(const CdmaAmpState& state, const CouplingSpec& spec,
                                const MatrixSETrace& se, const DenoiserKind& kind,
                                const SystemConfig& cfg);

}  // namespace maclab
