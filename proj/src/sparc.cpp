#include "maclab/sparc.hpp"

#include <cmath>
#include <stdexcept>

#include "maclab/quadrature.hpp"
#include "maclab/special.hpp"

namespace maclab {

namespace {

void check_simulation_scale(const SystemConfig& cfg) {
    if (cfg.k > 12) throw std::invalid_argument("sparc: simulation requires k <= 12 (M <= 4096)");
}

}  // namespace

SparcInstance sample_sparc_instance(const SystemConfig& cfg, const CouplingSpec& spec, Rng& rng) {
    check_simulation_scale(cfg);
    const long long L = cfg.L, n = cfg.n;
    const long long M = cfg.M_int();
    if (L % spec.C() != 0) throw std::invalid_argument("sparc: C must divide L");
    if (n % spec.R() != 0) throw std::invalid_argument("sparc: R must divide n");

    SparcInstance inst;
    Rng arng = rng.substream(1);
    inst.A = sample_sc_matrix(spec, static_cast<int>(n), static_cast<int>(L * M), arng);

    Rng xrng = rng.substream(2);
    inst.x = Eigen::VectorXd::Zero(L * M);
    inst.sent.assign(L, -1);
    const double sqE = std::sqrt(cfg.E());
    for (long long l = 0; l < L; ++l) {
        if (xrng.bernoulli(cfg.alpha)) {
            int j = static_cast<int>(xrng.below(M));
            inst.sent[l] = j;
            inst.x(l * M + j) = sqE;
            ++inst.Ka;
        }
    }

    Rng nrng = rng.substream(3);
    inst.y = inst.A * inst.x;
    const double sd = std::sqrt(cfg.sigma2);
    for (long long i = 0; i < n; ++i) inst.y(i) += sd * nrng.normal();
    return inst;
}

Eigen::VectorXd sparc_denoise_section(SparcDenoiser kind, const Eigen::VectorXd& s, double tau,
                                      const SystemConfig& cfg) {
    if (!(tau > 0.0)) throw std::invalid_argument("sparc_denoise_section: tau <= 0");
    const double E = cfg.E(), sqE = std::sqrt(E);
    const double M = cfg.M();
    const double alpha = cfg.alpha;
    const int m = static_cast<int>(s.size());
    Eigen::VectorXd out(m);
    if (kind == SparcDenoiser::bayes) {
        // atoms: ln(alpha/M) + s_j sqrt(E)/tau - E/(2 tau), silence: ln(1-alpha)
        Eigen::ArrayXd w = std::log(alpha / M) + (sqE / tau) * s.array() - E / (2.0 * tau);
        double w0 = alpha < 1.0 ? std::log1p(-alpha) : -kInf;
        double mx = std::max(w.maxCoeff(), w0);
        Eigen::ArrayXd ew = (w - mx).exp();
        double den = ew.sum() + std::exp(w0 - mx);
        out = (sqE / den) * ew.matrix();
    } else {
        const double am = alpha / M;
        double bias = std::log(am) - std::log1p(-am) - E / (2.0 * tau);
        for (int j = 0; j < m; ++j) {
            double u = bias + s(j) * sqE / tau;
            out(j) = sqE / (1.0 + std::exp(-u));
        }
    }
    return out;
}

Eigen::MatrixXd sparc_denoise_jacobian(SparcDenoiser kind, const Eigen::VectorXd& s, double tau,
                                       const SystemConfig& cfg) {
    if (!(tau > 0.0)) throw std::invalid_argument("sparc_denoise_jacobian: tau <= 0");
    const double E = cfg.E(), sqE = std::sqrt(E);
    const double M = cfg.M();
    const double alpha = cfg.alpha;
    const int m = static_cast<int>(s.size());
    if (kind == SparcDenoiser::bayes) {
        // eta = sqrt(E) p with p the softmax-with-silence posterior:
        // d eta / d s = (E / tau) (diag(p) - p p^T)
        Eigen::ArrayXd w = std::log(alpha / M) + (sqE / tau) * s.array() - E / (2.0 * tau);
        double w0 = alpha < 1.0 ? std::log1p(-alpha) : -kInf;
        double mx = std::max(w.maxCoeff(), w0);
        Eigen::ArrayXd ew = (w - mx).exp();
        double den = ew.sum() + std::exp(w0 - mx);
        Eigen::VectorXd p = (ew / den).matrix();
        return (E / tau) * (Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose());
    }
    const double am = alpha / M;
    double bias = std::log(am) - std::log1p(-am) - E / (2.0 * tau);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
        double sig = 1.0 / (1.0 + std::exp(-(bias + s(j) * sqE / tau)));
        J(j, j) = (E / tau) * sig * (1.0 - sig);
    }
    return J;
}

int sparc_hard_decide(const Eigen::VectorXd& s, double tau, const SystemConfig& cfg) {
    if (!(tau > 0.0)) throw std::invalid_argument("sparc_hard_decide: tau <= 0");
    const double E = cfg.E(), sqE = std::sqrt(E);
    const double M = cfg.M();
    int best = 0;
    double smax = s(0);
    for (int j = 1; j < s.size(); ++j)
        if (s(j) > smax) { smax = s(j); best = j; }  // ties keep lowest index
    double active_score = std::log(cfg.alpha / M) + smax * sqE / tau - E / (2.0 * tau);
    double silent_score = cfg.alpha < 1.0 ? std::log1p(-cfg.alpha) : -kInf;
    return active_score >= silent_score ? best : -1;  // tie resolves to nonzero
}

double sparc_mmse(SparcDenoiser kind, double tau, const SystemConfig& cfg, int mc_samples,
                  Rng& rng) {
    const double E = cfg.E();
    const double alpha = cfg.alpha;
    const double M = cfg.M();
    if (kind == SparcDenoiser::marginal) {
        const double am = alpha / M;
        const double sqE = std::sqrt(E), sqt = std::sqrt(tau);
        double bias = std::log(am) - std::log1p(-am) - E / (2.0 * tau);
        auto mhat = [&](double s) { return sqE / (1.0 + std::exp(-(bias + s * sqE / tau))); };
        auto g_active = [&](double z) { double d = sqE - mhat(sqE + sqt * z); return d * d; };
        auto g_silent = [&](double z) { double d = mhat(sqt * z); return d * d; };
        double ea = gauss_hermite_expectation_adaptive(g_active, 200);
        double es = gauss_hermite_expectation_adaptive(g_silent, 200);
        return M * (am * ea + (1.0 - am) * es);
    }
    if (cfg.M_int() == 2 && alpha == 1.0) {
        // two-atom section: the posterior mean lives on the antipodal axis, so
        // the section MMSE reduces to a 1-D integral
        double a = E / tau, b = std::sqrt(2.0 * E / tau);
        auto g = [&](double w) {
            double p1m = 1.0 / (1.0 + std::exp(a + b * w));  // 1 - sigma(a + b w)
            return 2.0 * E * p1m * p1m;
        };
        return gauss_hermite_expectation_adaptive(g, 200);
    }
    check_simulation_scale(cfg);
    const int m = static_cast<int>(cfg.M_int());
    const double sqE = std::sqrt(E), sqt = std::sqrt(tau);
    Eigen::VectorXd z(m), s(m);
    double acc = 0.0;
    for (int it = 0; it < mc_samples; ++it) {
        for (int j = 0; j < m; ++j) z(j) = rng.normal();
        // silent branch
        s = sqt * z;
        Eigen::VectorXd eta = sparc_denoise_section(SparcDenoiser::bayes, s, tau, cfg);
        double silent = eta.squaredNorm();
        // active branch, sent index 0 by symmetry
        s(0) += sqE;
        eta = sparc_denoise_section(SparcDenoiser::bayes, s, tau, cfg);
        eta(0) -= sqE;
        double active = eta.squaredNorm();
        acc += (1.0 - alpha) * silent + alpha * active;
    }
    return acc / mc_samples;
}

ScalarSETrace scalar_se_run(const SystemConfig& cfg, const CouplingSpec& spec, SparcDenoiser kind,
                            const ScalarSEOptions& opts, Rng& rng) {
    const int R = spec.R(), C = spec.C();
    const double mu_in = inner_density(spec, cfg.mu);
    const double E = cfg.E();
    ScalarSETrace tr;
    tr.psi.push_back(Eigen::VectorXd::Constant(C, E));
    for (int t = 0; t < opts.t_max; ++t) {
        const Eigen::VectorXd psi = tr.psi[t];  // copy: push_back below reallocates
        Eigen::VectorXd phi(R), tau(C);
        for (int r = 0; r < R; ++r)
            phi(r) = cfg.sigma2 + mu_in * (spec.W.row(r) * psi)(0);
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int r = 0; r < R; ++r)
                if (!spec.is_zero(r, c)) acc += spec.W(r, c) / phi(r);
            tau(c) = 1.0 / acc;
        }
        tr.phi.push_back(phi);
        tr.tau.push_back(tau);
        Eigen::VectorXd next(C);
        for (int c = 0; c < C; ++c) {
            Rng crn = rng.substream(100 + c);  // same draws every iteration
            next(c) = sparc_mmse(kind, tau(c), cfg, opts.mc_samples, crn);
        }
        tr.psi.push_back(next);
        tr.t_final = t;
        if (next.maxCoeff() > 1e3 * E)
            throw std::runtime_error("scalar_se_run: state evolution diverged");
        double rel = 0.0;
        for (int c = 0; c < C; ++c)
            rel = std::max(rel, std::fabs(next(c) - psi(c)) / std::max(psi(c), 1e-300));
        if (rel < opts.tol) break;
    }
    return tr;
}

SparcAmpState sparc_amp_init(const SparcInstance& inst) {
    SparcAmpState st;
    st.x = Eigen::VectorXd::Zero(inst.x.size());
    st.z = Eigen::VectorXd::Zero(inst.y.size());
    st.s = Eigen::VectorXd::Zero(inst.x.size());
    st.have_z = false;
    return st;
}

void sparc_amp_step(SparcAmpState& state, const SparcInstance& inst, const CouplingSpec& spec,
                    const ScalarSETrace& se, SparcDenoiser kind, const SystemConfig& cfg) {
    const int t = state.t;
    if (t > se.t_final) throw std::invalid_argument("sparc_amp_step: no SE values for t");
    const long long n = inst.y.size(), LM = inst.x.size();
    const long long M = cfg.M_int();
    const int R = spec.R(), C = spec.C();
    BlockIndexMaps maps(static_cast<int>(n), static_cast<int>(LM), spec);
    const double mu_in = inner_density(spec, cfg.mu);

    // z^t = y - A x^t + vtilde^t .* z^{t-1}
    Eigen::VectorXd z = inst.y - inst.A * state.x;
    if (state.have_z && t >= 1) {
        for (int r = 0; r < R; ++r) {
            double num = mu_in * (spec.W.row(r) * se.psi[t])(0);
            double vt = num / se.phi[t - 1](r);
            auto [i0, i1] = maps.row_range(r);
            z.segment(i0, i1 - i0) += vt * state.z.segment(i0, i1 - i0);
        }
    }

    // s^t = x^t + (Q .* A)^T z^t with Q_ij = tau_c(j) / phi_r(i)
    Eigen::VectorXd zw(n);
    for (int r = 0; r < R; ++r) {
        auto [i0, i1] = maps.row_range(r);
        zw.segment(i0, i1 - i0) = z.segment(i0, i1 - i0) / se.phi[t](r);
    }
    Eigen::VectorXd s = state.x;
    for (int c = 0; c < C; ++c) {
        auto [j0, j1] = maps.col_range(c);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(j1 - j0);
        for (int r = 0; r < R; ++r) {
            if (spec.is_zero(r, c)) continue;
            auto [i0, i1] = maps.row_range(r);
            acc.noalias() +=
                inst.A.block(i0, j0, i1 - i0, j1 - j0).transpose() * zw.segment(i0, i1 - i0);
        }
        s.segment(j0, j1 - j0) += se.tau[t](c) * acc;
    }

    // x^{t+1} = eta_t(s^t) section-wise
    Eigen::VectorXd xnext(LM);
    for (long long l = 0; l < LM / M; ++l) {
        int c = maps.col_block(static_cast<int>(l * M));
        xnext.segment(l * M, M) =
            sparc_denoise_section(kind, s.segment(l * M, M), se.tau[t](c), cfg);
    }

    state.x = std::move(xnext);
    state.z = std::move(z);
    state.s = std::move(s);
    state.have_z = true;
    state.t = t + 1;
}

std::vector<int> sparc_amp_decide(const SparcAmpState& state, const CouplingSpec& spec,
                                  const ScalarSETrace& se, const SystemConfig& cfg) {
    const long long M = cfg.M_int();
    const long long L = state.s.size() / M;
    const int t = state.t - 1;  // s holds s^{t-1} after a step
    if (t < 0) throw std::invalid_argument("sparc_amp_decide: run at least one step");
    const long long sections_per_block = L / spec.C();
    std::vector<int> out(L);
    for (long long l = 0; l < L; ++l) {
        int c = static_cast<int>(l / sections_per_block);
        out[l] = sparc_hard_decide(state.s.segment(l * M, M), se.tau[t](c), cfg);
    }
    return out;
}

ErrorTriple sparc_empirical_errors(const std::vector<int>& sent, const std::vector<int>& decided) {
    if (sent.size() != decided.size())
        throw std::invalid_argument("sparc_empirical_errors: size mismatch");
    long long ka = 0, ka_hat = 0, md = 0, fa = 0, aue = 0;
    for (std::size_t l = 0; l < sent.size(); ++l) {
        bool active = sent[l] >= 0, dec = decided[l] >= 0;
        ka += active;
        ka_hat += dec;
        if (active && !dec) ++md;
        if (!active && dec) ++fa;
        if (active && dec && decided[l] != sent[l]) ++aue;
    }
    ErrorTriple e;
    e.p_md = ka ? static_cast<double>(md) / ka : 0.0;
    e.p_fa = ka_hat ? static_cast<double>(fa) / ka_hat : 0.0;
    e.p_aue = ka ? static_cast<double>(aue) / ka : 0.0;
    return e;
}

}  // namespace maclab
