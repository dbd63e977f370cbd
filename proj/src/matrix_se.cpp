#include "maclab/matrix_se.hpp"

#include <cmath>
#include <stdexcept>

#include "maclab/quadrature.hpp"
#include "maclab/special.hpp"

namespace maclab {

namespace {

Eigen::MatrixXd symmetrize_psd(const Eigen::MatrixXd& M) {
    Eigen::MatrixXd S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Fills Phi (from Psi) and T (from Phi) at the current iteration.
void fill_phi_T(MatrixSEState& st, const SystemConfig& cfg, const CouplingSpec& spec) {
    const int R = spec.R(), C = spec.C(), k = cfg.k;
    const double kmu_in = cfg.k * inner_density(spec, cfg.mu);
    st.Phi.assign(R, Eigen::MatrixXd());
    st.T.assign(C, Eigen::MatrixXd());
    for (int r = 0; r < R; ++r) {
        Eigen::MatrixXd acc = cfg.sigma2 * Eigen::MatrixXd::Identity(k, k);
        for (int c = 0; c < C; ++c)
            if (!spec.is_zero(r, c)) acc += kmu_in * spec.W(r, c) * st.Psi[c];
        st.Phi[r] = acc;
    }
    std::vector<Eigen::MatrixXd> PhiInv(R);
    for (int r = 0; r < R; ++r) {
        Eigen::LLT<Eigen::MatrixXd> llt(st.Phi[r]);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("matrix_se: Phi_r not positive definite");
        PhiInv[r] = llt.solve(Eigen::MatrixXd::Identity(k, k));
    }
    for (int c = 0; c < C; ++c) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(k, k);
        for (int r = 0; r < R; ++r)
            if (!spec.is_zero(r, c)) acc += spec.W(r, c) * PhiInv[r];
        Eigen::LLT<Eigen::MatrixXd> llt(acc);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("matrix_se: sum_r W [Phi_r]^{-1} is singular");
        st.T[c] = llt.solve(Eigen::MatrixXd::Identity(k, k));
    }
}

// E[(eta(X+G)-X)(eta(X+G)-X)^T] by stratified MC with fixed substreams so the
// same standard normals are reused at every t and every sweep point.
// k = 1 with a conditional-mean denoiser is a scalar 3-point-prior channel;
// quadrature replaces Monte Carlo there (needed at 1e-6 agreement scales).
double psi_update_scalar_quad(double T, const SystemConfig& cfg) {
    const double Eb = cfg.Eb, sqEb = std::sqrt(Eb), sqT = std::sqrt(T);
    const double la = cfg.alpha < 1.0 ? std::log1p(-cfg.alpha) : -kInf;
    const double lha = std::log(cfg.alpha / 2.0);
    auto eta = [&](double s) {
        double base = lha - Eb / (2.0 * T);
        double up = base + sqEb * s / T, um = base - sqEb * s / T;
        double mx = std::max({up, um, la});
        double wp = std::exp(up - mx), wm = std::exp(um - mx), w0 = std::exp(la - mx);
        return sqEb * (wp - wm) / (wp + wm + w0);
    };
    auto g_active = [&](double z) { double d = sqEb - eta(sqEb + sqT * z); return d * d; };
    auto g_silent = [&](double z) { double d = eta(sqT * z); return d * d; };
    double v = cfg.alpha * gauss_hermite_expectation_adaptive(g_active, 200);
    if (cfg.alpha < 1.0)
        v += (1.0 - cfg.alpha) * gauss_hermite_expectation_adaptive(g_silent, 200);
    return v;
}

Eigen::MatrixXd psi_update_mc(const Eigen::MatrixXd& Tc, const SystemConfig& cfg,
                              const DenoiserKind& kind, int mc_samples, Rng& rng, int block) {
    const int k = cfg.k;
    if (k == 1 && kind.kind != CdmaDenoiser::threshold) {
        Eigen::MatrixXd out(1, 1);
        out(0, 0) = psi_update_scalar_quad(std::max(Tc(0, 0), 1e-300), cfg);
        return out;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Tc);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("matrix_se: T_c not positive definite");
    Eigen::MatrixXd Lc = llt.matrixL();
    RowDenoiserCtx ctx(kind, Tc, cfg);
    const double sqEb = std::sqrt(cfg.Eb);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd zeta(k), g(k), s(k), x(k), d(k);
    const int chunk = 8192;
    for (int s0 = 0; s0 < mc_samples; s0 += chunk) {
        Rng local = rng.substream((static_cast<std::uint64_t>(block) << 32) | (s0 / chunk));
        int s1 = std::min(mc_samples, s0 + chunk);
        for (int i = s0; i < s1; ++i) {
            for (int j = 0; j < k; ++j) zeta(j) = local.normal();
            for (int j = 0; j < k; ++j) x(j) = local.bernoulli(0.5) ? sqEb : -sqEb;
            g.noalias() = Lc * zeta;
            if (cfg.alpha > 0.0) {
                s = x + g;
                ctx.denoise(s, d);
                d -= x;
                acc.noalias() += cfg.alpha * d * d.transpose();
            }
            if (cfg.alpha < 1.0) {
                ctx.denoise(g, d);
                acc.noalias() += (1.0 - cfg.alpha) * d * d.transpose();
            }
        }
    }
    return symmetrize_psd(acc / mc_samples);
}

}  // namespace

MatrixSEState matrix_se_init(const SystemConfig& cfg, const CouplingSpec& spec) {
    MatrixSEState st;
    st.t = 0;
    st.Psi.assign(spec.C(),
                  cfg.alpha * cfg.Eb * Eigen::MatrixXd::Identity(cfg.k, cfg.k));
    return st;
}

MatrixSEState matrix_se_step(const MatrixSEState& state, const SystemConfig& cfg,
                             const CouplingSpec& spec, const DenoiserKind& kind, int mc_samples,
                             Rng& rng) {
    MatrixSEState st = state;
    fill_phi_T(st, cfg, spec);
    MatrixSEState next;
    next.t = st.t + 1;
    next.Phi = st.Phi;
    next.T = st.T;
    next.Psi.resize(spec.C());
    for (int c = 0; c < spec.C(); ++c)
        next.Psi[c] = psi_update_mc(st.T[c], cfg, kind, mc_samples, rng, c);
    return next;
}

MatrixSETrace se_fixed_point(const SystemConfig& cfg, const CouplingSpec& spec,
                             const DenoiserKind& kind, const MatrixSEOptions& opts, Rng& rng) {
    MatrixSETrace tr;
    MatrixSEState st = matrix_se_init(cfg, spec);
    const double trace0 = st.Psi[0].trace();
    tr.Psi.push_back(st.Psi);
    Rng crn = rng.substream(0x5345);  // fixed: common random numbers across t
    for (int t = 0; t < opts.t_max; ++t) {
        MatrixSEState next = matrix_se_step(st, cfg, spec, kind, opts.mc_samples, crn);
        tr.Phi.push_back(next.Phi);
        tr.T.push_back(next.T);
        tr.Psi.push_back(next.Psi);
        tr.t_final = t;
        double rel = 0.0, mx = 0.0;
        for (int c = 0; c < spec.C(); ++c) {
            double prev = st.Psi[c].trace(), cur = next.Psi[c].trace();
            rel = std::max(rel, std::fabs(cur - prev) / std::max(prev, 1e-300));
            mx = std::max(mx, cur);
        }
        if (mx > 1e3 * std::max(trace0, 1e-300))
            throw std::runtime_error("se_fixed_point: state evolution diverged");
        st.Psi = next.Psi;
        st.t = next.t;
        if (rel < opts.tol) break;
    }
    return tr;
}

PredictedErrors predict_errors_detailed(const MatrixSETrace& se, int t, const SystemConfig& cfg,
                                        const DenoiserKind& kind, const MatrixSEOptions& opts,
                                        Rng& rng) {
    if (t < 0 || t > se.t_final) throw std::invalid_argument("predict_errors: bad t");
    const int C = static_cast<int>(se.T[t].size());
    const int k = cfg.k;
    const double sqEb = std::sqrt(cfg.Eb);
    Rng crn = rng.substream(0x5045);

    long long N = opts.predict_samples;
    PredictedErrors out;
    for (;;) {
        std::vector<double> p_md(C), p_wrong(C), p_a_nz(C), p_s_nz(C);
        for (int c = 0; c < C; ++c) {
            Eigen::LLT<Eigen::MatrixXd> llt(se.T[t][c]);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("predict_errors: T_c not positive definite");
            Eigen::MatrixXd Lc = llt.matrixL();
            RowDenoiserCtx ctx(kind, se.T[t][c], cfg);
            long long md = 0, wrong = 0, s_nz = 0;
            Eigen::VectorXd zeta(k), g(k), x(k), h(k), s(k);
            const long long chunk = 8192;
            for (long long s0 = 0; s0 < N; s0 += chunk) {
                Rng local = crn.substream((static_cast<std::uint64_t>(c) << 40) | (s0 / chunk));
                long long s1 = std::min(N, s0 + chunk);
                for (long long i = s0; i < s1; ++i) {
                    for (int j = 0; j < k; ++j) zeta(j) = local.normal();
                    for (int j = 0; j < k; ++j) x(j) = local.bernoulli(0.5) ? sqEb : -sqEb;
                    g.noalias() = Lc * zeta;
                    s = x + g;
                    ctx.hard_decide(s, h);
                    bool zero = h.isZero(0.0);
                    if (zero) ++md;
                    else if ((h.array() != x.array()).any()) ++wrong;
                    if (cfg.alpha < 1.0) {
                        ctx.hard_decide(g, h);
                        if (!h.isZero(0.0)) ++s_nz;
                    }
                }
            }
            p_md[c] = static_cast<double>(md) / N;
            p_wrong[c] = static_cast<double>(wrong) / N;
            p_a_nz[c] = 1.0 - p_md[c];
            p_s_nz[c] = static_cast<double>(s_nz) / N;
        }
        double md = 0.0, wrong = 0.0, U = 0.0, V = 0.0;
        double var_md = 0.0, var_wrong = 0.0, var_U = 0.0, var_V = 0.0;
        for (int c = 0; c < C; ++c) {
            md += p_md[c] / C;
            wrong += p_wrong[c] / C;
            U += p_a_nz[c];
            V += p_s_nz[c];
            var_md += p_md[c] * (1.0 - p_md[c]) / N / (C * C);
            var_wrong += p_wrong[c] * (1.0 - p_wrong[c]) / N / (C * C);
            var_U += p_a_nz[c] * (1.0 - p_a_nz[c]) / N;
            var_V += p_s_nz[c] * (1.0 - p_s_nz[c]) / N;
        }
        out.mean.p_md = md;
        out.mean.p_aue = wrong;
        out.std_err.p_md = std::sqrt(var_md);
        out.std_err.p_aue = std::sqrt(var_wrong);
        if (cfg.alpha >= 1.0 || V <= 0.0) {
            out.mean.p_fa = 0.0;
            out.std_err.p_fa = 0.0;
        } else {
            double rho = cfg.alpha * U / ((1.0 - cfg.alpha) * V);
            double pfa = 1.0 / (rho + 1.0);
            double rel2 = var_U / (U * U) + var_V / (V * V);
            out.mean.p_fa = pfa;
            out.std_err.p_fa = pfa * (1.0 - pfa) * std::sqrt(rel2);
        }
        out.samples = N;
        double comb = out.mean.combined();
        double comb_se = std::sqrt(std::max(out.std_err.p_md * out.std_err.p_md,
                                            out.std_err.p_fa * out.std_err.p_fa) +
                                   out.std_err.p_aue * out.std_err.p_aue);
        if (comb <= 0.0 || comb_se <= opts.predict_rel_se * comb ||
            N >= opts.predict_max_samples)
            return out;
        N = std::min<long long>(2 * N, opts.predict_max_samples);
    }
}

ErrorTriple predict_errors(const MatrixSETrace& se, int t, const SystemConfig& cfg,
                           const DenoiserKind& kind, const MatrixSEOptions& opts, Rng& rng) {
    return predict_errors_detailed(se, t, cfg, kind, opts, rng).mean;
}

}  // namespace maclab
