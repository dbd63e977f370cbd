#include "maclab/cdma.hpp"

#include <cmath>
#include <stdexcept>

#include "maclab/common.hpp"
#include "maclab/matrix_se.hpp"
#include "maclab/special.hpp"

namespace maclab {

namespace {

constexpr double kDiagClampFactor = 1e-12;

}  // namespace

CdmaInstance sample_cdma_instance(const SystemConfig& cfg, const CouplingSpec& spec, Rng& rng,
                                  int threads) {
    if (cfg.n % cfg.k != 0) throw std::invalid_argument("sample_cdma_instance: k must divide n");
    const long long ntilde = cfg.n / cfg.k;
    if (ntilde % spec.R() != 0)
        throw std::invalid_argument("sample_cdma_instance: R must divide n/k");
    if (cfg.L % spec.C() != 0)
        throw std::invalid_argument("sample_cdma_instance: C must divide L");

    CdmaInstance inst;
    Rng arng = rng.substream(1);
    inst.A = sample_sc_matrix(spec, static_cast<int>(ntilde), static_cast<int>(cfg.L), arng,
                              threads);

    Rng xrng = rng.substream(2);
    inst.X = Eigen::MatrixXd::Zero(cfg.L, cfg.k);
    inst.active.assign(cfg.L, 0);
    const double sqEb = std::sqrt(cfg.Eb);
    for (long long l = 0; l < cfg.L; ++l) {
        if (xrng.bernoulli(cfg.alpha)) {
            inst.active[l] = 1;
            ++inst.Ka;
            for (int j = 0; j < cfg.k; ++j) inst.X(l, j) = xrng.bernoulli(0.5) ? sqEb : -sqEb;
        }
    }

    Rng nrng = rng.substream(3);
    inst.Y = inst.A * inst.X;
    const double sd = std::sqrt(cfg.sigma2);
    for (long long i = 0; i < ntilde; ++i)
        for (int j = 0; j < cfg.k; ++j) inst.Y(i, j) += sd * nrng.normal();
    return inst;
}

double threshold_alpha_star(double Tbar, double Eb, int k) {
    double q = std::sqrt(Tbar / (Tbar + 2.0 * Eb)) * std::exp(-Eb * k / (8.0 * Tbar));
    return 1.0 / (1.0 + q);
}

bool threshold_is_active(double Y, double Tbar, double Eb, int k, double alpha_hat) {
    if (alpha_hat >= threshold_alpha_star(Tbar, Eb, k)) return true;
    double lnterm =
        std::log((1.0 - alpha_hat) / alpha_hat) + 0.5 * std::log((Tbar + 2.0 * Eb) / Tbar);
    double c =
        (-Tbar * Eb * Eb - Tbar * (Tbar + 2.0 * Eb) * (4.0 * Tbar / k) * lnterm) / (2.0 * Eb);
    return Y * Y - Tbar * Y + c >= 0.0;  // tie resolves to H1
}

// ------------------------------------------------------------- row context

struct RowDenoiserCtx::Impl {
    DenoiserKind kind;
    SystemConfig cfg;
    double Eb, sqEb;
    Eigen::VectorXd Tjj;        // clamped diagonal
    double Tbar = 0.0;
    bool always_active = false;
    double test_c = 0.0;        // quadratic constant of the activity test
    // bayes
    Eigen::MatrixXd Sgn;   // k x 2^k
    Eigen::MatrixXd B;     // 2^k x k
    Eigen::VectorXd q;     // 2^k
    Eigen::MatrixXd Tinv;  // k x k
    double ln_active = 0.0, ln_silent = 0.0;

    Impl(const DenoiserKind& kd, const Eigen::MatrixXd& Tc, const SystemConfig& c0)
        : kind(kd), cfg(c0) {
        const int k = cfg.k;
        if (Tc.rows() != k || Tc.cols() != k)
            throw std::invalid_argument("denoise_row: covariance dimension mismatch");
        Eb = cfg.Eb;
        sqEb = std::sqrt(Eb);
        Eigen::LLT<Eigen::MatrixXd> llt(Tc);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("denoise_row: covariance must be positive definite");
        Tjj.resize(k);
        for (int j = 0; j < k; ++j) Tjj(j) = std::max(Tc(j, j), kDiagClampFactor * Eb);
        Tbar = Tjj.mean();
        if (kind.kind == CdmaDenoiser::threshold) {
            double ah = kind.resolved_alpha_hat(cfg);
            if (!(ah > 0.0 && ah <= 1.0))
                throw std::invalid_argument("threshold denoiser: alpha_hat must be in (0,1]");
            always_active = ah >= threshold_alpha_star(Tbar, Eb, k);
            if (!always_active) {
                double lnterm = std::log((1.0 - ah) / ah) +
                                0.5 * std::log((Tbar + 2.0 * Eb) / Tbar);
                test_c = (-Tbar * Eb * Eb -
                          Tbar * (Tbar + 2.0 * Eb) * (4.0 * Tbar / k) * lnterm) /
                         (2.0 * Eb);
            }
        }
        if (kind.kind == CdmaDenoiser::bayes) {
            if (k > 12) throw std::invalid_argument("bayes denoiser: k <= 12 required");
            const int A = 1 << k;
            Tinv = llt.solve(Eigen::MatrixXd::Identity(k, k));
            Sgn.resize(k, A);
            for (int a = 0; a < A; ++a)
                for (int j = 0; j < k; ++j) Sgn(j, a) = (a >> j) & 1 ? 1.0 : -1.0;
            B = sqEb * (Tinv * Sgn).transpose();
            q.resize(A);
            for (int a = 0; a < A; ++a)
                q(a) = 0.5 * Eb * (Sgn.col(a).transpose() * Tinv * Sgn.col(a))(0);
            ln_active = std::log(cfg.alpha) - k * 0.6931471805599453094;
            ln_silent = cfg.alpha < 1.0 ? std::log1p(-cfg.alpha) : -kInf;
        }
    }

    bool test(double Y) const {
        if (always_active) return true;
        return Y * Y - Tbar * Y + test_c >= 0.0;
    }

    void bayes_posterior(const Eigen::VectorXd& s, Eigen::VectorXd& p, double& p_silent) const {
        Eigen::VectorXd logits = B * s - q;
        logits.array() += ln_active;
        double mx = std::max(logits.maxCoeff(), ln_silent);
        p = (logits.array() - mx).exp();
        p_silent = std::exp(ln_silent - mx);
        double z = p.sum() + p_silent;
        p /= z;
        p_silent /= z;
    }
};

RowDenoiserCtx::RowDenoiserCtx(const DenoiserKind& kind, const Eigen::MatrixXd& Tc,
                               const SystemConfig& cfg)
    : impl_(std::make_unique<Impl>(kind, Tc, cfg)) {}
RowDenoiserCtx::~RowDenoiserCtx() = default;
RowDenoiserCtx::RowDenoiserCtx(RowDenoiserCtx&&) noexcept = default;

bool RowDenoiserCtx::test_active(double Y) const { return impl_->test(Y); }
double RowDenoiserCtx::Tbar() const { return impl_->Tbar; }

void RowDenoiserCtx::denoise(const Eigen::VectorXd& s, Eigen::VectorXd& xhat,
                             Eigen::MatrixXd* jacobian) const {
    const Impl& im = *impl_;
    const int k = im.cfg.k;
    xhat.resize(k);
    if (jacobian) jacobian->setZero(k, k);

    switch (im.kind.kind) {
        case CdmaDenoiser::bayes: {
            Eigen::VectorXd p;
            double p0;
            im.bayes_posterior(s, p, p0);
            xhat = im.sqEb * (im.Sgn * p);
            if (jacobian) {
                Eigen::MatrixXd second = im.Eb * im.Sgn * p.asDiagonal() * im.Sgn.transpose();
                *jacobian = (second - xhat * xhat.transpose()) * im.Tinv;
            }
            break;
        }
        case CdmaDenoiser::marginal: {
            const double la = im.cfg.alpha < 1.0 ? std::log1p(-im.cfg.alpha) : -kInf;
            const double lha = std::log(im.cfg.alpha / 2.0);
            for (int j = 0; j < k; ++j) {
                double T = im.Tjj(j);
                double e = im.sqEb * s(j) / T;
                double base = lha - im.Eb / (2.0 * T);
                double up = base + e, um = base - e;
                double mx = std::max({up, um, la});
                double wp = std::exp(up - mx), wm = std::exp(um - mx), w0 = std::exp(la - mx);
                double den = wp + wm + w0;
                double m1 = im.sqEb * (wp - wm) / den;
                xhat(j) = m1;
                if (jacobian) {
                    double m2 = im.Eb * (wp + wm) / den;
                    (*jacobian)(j, j) = (m2 - m1 * m1) / T;
                }
            }
            break;
        }
        case CdmaDenoiser::threshold: {
            if (im.test(s.squaredNorm() / k)) {
                for (int j = 0; j < k; ++j) {
                    double T = im.Tjj(j);
                    double th = std::tanh(im.sqEb * s(j) / T);
                    xhat(j) = im.sqEb * th;
                    if (jacobian) (*jacobian)(j, j) = im.Eb * (1.0 - th * th) / T;
                }
            } else {
                xhat.setZero();
            }
            break;
        }
    }
}

void RowDenoiserCtx::hard_decide(const Eigen::VectorXd& s, Eigen::VectorXd& out) const {
    const Impl& im = *impl_;
    const int k = im.cfg.k;
    out.setZero(k);
    switch (im.kind.kind) {
        case CdmaDenoiser::threshold: {
            if (im.test(s.squaredNorm() / k))
                for (int j = 0; j < k; ++j) out(j) = s(j) >= 0.0 ? im.sqEb : -im.sqEb;
            break;
        }
        case CdmaDenoiser::marginal: {
            // entrywise MAP over {0, +-sqrt(Eb)} with the marginal prior
            const double la = im.cfg.alpha < 1.0 ? std::log1p(-im.cfg.alpha) : -kInf;
            const double lha = std::log(im.cfg.alpha / 2.0);
            for (int j = 0; j < k; ++j) {
                double T = im.Tjj(j);
                double act = lha + im.sqEb * std::fabs(s(j)) / T - im.Eb / (2.0 * T);
                if (act >= la) out(j) = s(j) >= 0.0 ? im.sqEb : -im.sqEb;
            }
            break;
        }
        case CdmaDenoiser::bayes: {
            Eigen::VectorXd logits = im.B * s - im.q;
            logits.array() += im.ln_active;
            int best;
            double mx = logits.maxCoeff(&best);
            if (mx >= im.ln_silent) out = im.sqEb * im.Sgn.col(best);
            break;
        }
    }
}

RowDenoise denoise_row(const DenoiserKind& kind, const Eigen::VectorXd& s,
                       const Eigen::MatrixXd& Tc, const SystemConfig& cfg) {
    RowDenoiserCtx ctx(kind, Tc, cfg);
    RowDenoise out;
    out.jacobian.resize(cfg.k, cfg.k);
    ctx.denoise(s, out.xhat, &out.jacobian);
    return out;
}

Eigen::VectorXd hard_decide_row(const DenoiserKind& kind, const Eigen::VectorXd& s,
                                const Eigen::MatrixXd& Tc, const SystemConfig& cfg) {
    RowDenoiserCtx ctx(kind, Tc, cfg);
    Eigen::VectorXd out;
    ctx.hard_decide(s, out);
    return out;
}

ErrorTriple empirical_errors(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xhat) {
    if (X.rows() != Xhat.rows() || X.cols() != Xhat.cols())
        throw std::invalid_argument("empirical_errors: shape mismatch");
    long long ka = 0, ka_hat = 0, md = 0, fa = 0, aue = 0;
    for (long long l = 0; l < X.rows(); ++l) {
        bool active = !X.row(l).isZero(0.0);
        bool dec = !Xhat.row(l).isZero(0.0);
        ka += active;
        ka_hat += dec;
        if (active && !dec) ++md;
        if (!active && dec) ++fa;
        if (active && dec && (X.row(l).array() != Xhat.row(l).array()).any()) ++aue;
    }
    ErrorTriple e;
    e.p_md = ka ? static_cast<double>(md) / ka : 0.0;
    e.p_fa = ka_hat ? static_cast<double>(fa) / ka_hat : 0.0;
    e.p_aue = ka ? static_cast<double>(aue) / ka : 0.0;
    return e;
}

CdmaAmpState cdma_amp_init(const CdmaInstance& inst, int k) {
    CdmaAmpState st;
    st.X = Eigen::MatrixXd::Zero(inst.X.rows(), k);
    st.Z = Eigen::MatrixXd::Zero(inst.Y.rows(), k);
    st.S = Eigen::MatrixXd::Zero(inst.X.rows(), k);
    st.have_prev = false;
    return st;
}

void cdma_amp_step(CdmaAmpState& state, const CdmaInstance& inst, const CouplingSpec& spec,
                   const MatrixSETrace& se, const DenoiserKind& kind, const SystemConfig& cfg,
                   int threads) {
    const int t = state.t;
    if (t > se.t_final) throw std::invalid_argument("cdma_amp_step: no SE values for t");
    const int R = spec.R(), C = spec.C(), k = cfg.k;
    const long long ntilde = inst.Y.rows(), L = inst.X.rows();
    BlockIndexMaps rmaps(static_cast<int>(ntilde), static_cast<int>(L), spec);
    const double kmu_in = cfg.k * inner_density(spec, cfg.mu);

    // Z^t = Y - A X^t + Ztilde
    Eigen::MatrixXd Z = inst.Y - inst.A * state.X;
    if (state.have_prev && t >= 1) {
        for (int r = 0; r < R; ++r) {
            Eigen::MatrixXd Mr = Eigen::MatrixXd::Zero(k, k);
            for (int c = 0; c < C; ++c) {
                if (spec.is_zero(r, c)) continue;
                Mr += kmu_in * spec.W(r, c) * state.Jbar[c] * state.Qprev[r][c].transpose();
            }
            auto [i0, i1] = rmaps.row_range(r);
            Z.middleRows(i0, i1 - i0) += state.Z.middleRows(i0, i1 - i0) * Mr.transpose();
        }
    }

    // Q^t_{r,c} = [Phi_r^t]^{-1} T_c^t
    std::vector<std::vector<Eigen::MatrixXd>> Q(R, std::vector<Eigen::MatrixXd>(C));
    for (int r = 0; r < R; ++r) {
        Eigen::LLT<Eigen::MatrixXd> llt(se.Phi[t][r]);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("cdma_amp_step: Phi_r not positive definite");
        for (int c = 0; c < C; ++c)
            if (!spec.is_zero(r, c)) Q[r][c] = llt.solve(se.T[t][c]);
    }

    // S^t = X^t + V^t ; V rows in block c: sum_r A(I_r,L_c)^T Z(I_r) Q[r][c]
    Eigen::MatrixXd S = state.X;
    for (int c = 0; c < C; ++c) {
        auto [j0, j1] = rmaps.col_range(c);
        for (int r = 0; r < R; ++r) {
            if (spec.is_zero(r, c)) continue;
            auto [i0, i1] = rmaps.row_range(r);
            S.middleRows(j0, j1 - j0).noalias() +=
                inst.A.block(i0, j0, i1 - i0, j1 - j0).transpose() * Z.middleRows(i0, i1 - i0) *
                Q[r][c];
        }
    }

    // X^{t+1} = eta_t(S^t) row-block-wise; track block-average Jacobians
    Eigen::MatrixXd Xnext(L, k);
    std::vector<Eigen::MatrixXd> Jbar(C);
    const long long rows_per_block = L / C;
    parallel_for(C, threads, [&](std::size_t c) {
        RowDenoiserCtx ctx(kind, se.T[t][c], cfg);
        Eigen::MatrixXd Jsum = Eigen::MatrixXd::Zero(k, k);
        Eigen::MatrixXd jac(k, k);
        Eigen::VectorXd xhat(k), s(k);
        const long long lo = c * rows_per_block, hi = lo + rows_per_block;
        for (long long l = lo; l < hi; ++l) {
            s = S.row(l).transpose();
            ctx.denoise(s, xhat, &jac);
            Xnext.row(l) = xhat.transpose();
            Jsum += jac;
        }
        Jbar[c] = Jsum / static_cast<double>(rows_per_block);
    });

    state.X = std::move(Xnext);
    state.Z = std::move(Z);
    state.S = std::move(S);
    state.Jbar = std::move(Jbar);
    state.Qprev = std::move(Q);
    state.have_prev = true;
    state.t = t + 1;
}

Eigen::MatrixXd cdma_amp_decide(const CdmaAmpState& state, const CouplingSpec& spec,
                                const MatrixSETrace& se, const DenoiserKind& kind,
                                const SystemConfig& cfg) {
    const int t = state.t - 1;
    if (t < 0) throw std::invalid_argument("cdma_amp_decide: run at least one step");
    const long long L = state.S.rows();
    const long long rows_per_block = L / spec.C();
    Eigen::MatrixXd Xhat(L, cfg.k);
    Eigen::VectorXd s(cfg.k), h(cfg.k);
    for (int c = 0; c < spec.C(); ++c) {
        RowDenoiserCtx ctx(kind, se.T[t][c], cfg);
        for (long long l = c * rows_per_block; l < (c + 1) * rows_per_block; ++l) {
            s = state.S.row(l).transpose();
            ctx.hard_decide(s, h);
            Xhat.row(l) = h.transpose();
        }
    }
    return Xhat;
}

}  // namespace maclab
