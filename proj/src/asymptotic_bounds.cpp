#include "maclab/asymptotic_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "maclab/common.hpp"
#include "maclab/optimize.hpp"
#include "maclab/quadrature.hpp"
#include "maclab/rng.hpp"

namespace maclab {

namespace {

// Inverse standard normal CDF (Acklam approximation).
double inv_norm_cdf(double p) {
    if (p <= 0.0) return -kInf;
    if (p >= 1.0) return kInf;
    static const double a1 = -39.69683028665376, a2 = 220.9460984245205, a3 = -275.9285104469687,
                        a4 = 138.3577518672690, a5 = -30.66479806614716, a6 = 2.506628277459239;
    static const double b1 = -54.47609879822406, b2 = 161.5858368580409, b3 = -155.6989798598866,
                        b4 = 66.80131188771972, b5 = -13.28068155288572;
    static const double c1 = -7.784894002430293e-03, c2 = -3.223964580411365e-01,
                        c3 = -2.400758277161838, c4 = -2.549732539343734, c5 = 4.374664141464968,
                        c6 = 2.938163982698783;
    static const double d1 = 7.784695709041462e-03, d2 = 3.224671290700398e-01,
                        d3 = 2.445134137142996, d4 = 3.754408661907416;
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c1 * q + c2) * q + c3) * q + c4) * q + c5) * q + c6) /
               ((((d1 * q + d2) * q + d3) * q + d4) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c1 * q + c2) * q + c3) * q + c4) * q + c5) * q + c6) /
               ((((d1 * q + d2) * q + d3) * q + d4) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a1 * r + a2) * r + a3) * r + a4) * r + a5) * r + a6) * q /
           (((((b1 * r + b2) * r + b3) * r + b4) * r + b5) * r + 1);
}

// int_{z0}^{inf} (1 - Phi(z + shift)^m) phi(z) dz. The integrand is a smooth
// decreasing sigmoid; the window is sized from where m*Q(z+shift) crosses 1.
double integrate_sigmoid_tail(double shift, double m, double z0) {
    // upper-tail inverse via symmetry: Q(z) = p  <=>  z = -Phi^{-1}(p)
    double zstar = -inv_norm_cdf(std::min(0.5, 1.0 / std::max(m, 2.0))) - shift;
    double lo = std::max(z0, std::min(-12.0, zstar - 12.0));
    double hi = std::max({lo + 1.0, 12.0, zstar + 10.0});
    double head = 0.0;
    if (lo > z0) {
        // integrand is 1 up to absorbed precision below lo
        head = std_normal_cdf(lo) - std_normal_cdf(z0);
    }
    auto f = [&](double z) { return one_minus_cdf_pow(z + shift, m); };
    int segs = std::clamp(static_cast<int>((hi - lo) * 4.0), 32, 192);
    double v1 = integrate_against_normal(f, lo, hi, segs, 16);
    double v2 = integrate_against_normal(f, lo, hi, 2 * segs, 16);
    double val = v2;
    if (std::fabs(v2 - v1) > 1e-8 * std::max(1e-300, std::fabs(v2)))
        val = integrate_against_normal(f, lo, hi, 4 * segs, 16);
    return head + val;
}

}  // namespace

// ---------------------------------------------------------------- Bayes MI

BayesMiSampler::BayesMiSampler(int k, const PotentialOptions& opts) : opts_(opts) {
    if (k > 12) throw std::invalid_argument("BayesMiSampler: bayes kind requires k <= 12");
    M_ = 1 << k;
    S_ = opts.mc_samples;
    Z_.resize(M_, S_);
    // chunked substreams so that growing S keeps existing samples fixed
    const int chunk = 4096;
    Rng base(opts.seed, 0x4d49);  // "MI"
    for (int s0 = 0; s0 < S_; s0 += chunk) {
        Rng r = base.substream(s0 / chunk);
        int s1 = std::min(S_, s0 + chunk);
        for (int s = s0; s < s1; ++s)
            for (int j = 0; j < M_; ++j) Z_(j, s) = r.normal();
    }
}

double BayesMiSampler::eval(double tau, double E, double alpha) const {
    const double a = std::sqrt(E / tau), c = E / (2.0 * tau);
    const double lnam = std::log(alpha) - std::log(static_cast<double>(M_));
    const double ln1a = alpha < 1.0 ? std::log1p(-alpha) : -kInf;
    const double lc = alpha < 1.0 ? std::log(alpha) - std::log(static_cast<double>(M_)) - std::log1p(-alpha)
                                  : 0.0;
    double mean = 0.0, m2 = 0.0;
    Eigen::ArrayXd w(M_), ex(M_);
    for (int s = 0; s < S_; ++s) {
        w = a * Z_.col(s).array() - c + lnam;
        double w0_plus = lnam + a * Z_(0, s) + c;
        double mx1 = std::max({w.tail(M_ - 1).maxCoeff(), w0_plus, ln1a});
        ex = (w - mx1).exp();
        double sum1 = ex.sum() - ex(0) + std::exp(w0_plus - mx1);
        if (alpha < 1.0) sum1 += std::exp(ln1a - mx1);
        double lse1 = mx1 + std::log(sum1);
        double y = alpha * lse1;
        if (alpha < 1.0) {
            w += lc - lnam;  // exponents lc + a z_j - c
            double mx2 = std::max(w.maxCoeff(), 0.0);
            ex = (w - mx2).exp();
            double lse2 = mx2 + std::log(ex.sum() + std::exp(-mx2));
            y += (1.0 - alpha) * lse2;
        }
        mean += y;
        m2 += y * y;
    }
    mean /= S_;
    m2 /= S_;
    last_se_ = std::sqrt(std::max(0.0, m2 - mean * mean) / S_);
    double base = alpha * E / (2.0 * tau);
    if (alpha < 1.0) base -= (1.0 - alpha) * std::log1p(-alpha);
    return base - mean;
}

void BayesMiSampler::ensure_precision(double tau, double E, double alpha) {
    for (;;) {
        eval(tau, E, alpha);
        if (last_se_ <= opts_.mc_se_target || S_ >= opts_.max_mc_samples) return;
        int new_S = std::min(opts_.max_mc_samples, 2 * S_);
        Eigen::MatrixXd Z2(M_, new_S);
        Z2.leftCols(S_) = Z_;
        const int chunk = 4096;
        Rng base(opts_.seed, 0x4d49);
        int start = (S_ / chunk) * chunk;
        for (int s0 = start; s0 < new_S; s0 += chunk) {
            Rng r = base.substream(s0 / chunk);
            int s1 = std::min(new_S, s0 + chunk);
            for (int s = s0; s < s1; ++s) {
                Eigen::ArrayXd col(M_);
                for (int j = 0; j < M_; ++j) col(j) = r.normal();
                if (s >= S_) Z2.col(s) = col;
            }
        }
        Z_ = std::move(Z2);
        S_ = new_S;
    }
}

double marginal_mutual_info(double tau, double E, double alpha, double M) {
    const double a = std::sqrt(E / tau), c = E / (2.0 * tau);
    const double am = alpha / M;
    const double ln_Ma_m1 = std::log(M / alpha - 1.0);
    auto g1 = [&](double z) { return logaddexp(0.0, ln_Ma_m1 + a * z - c); };
    auto g2 = [&](double z) { return logaddexp(a * z - c, ln_Ma_m1); };
    double e1 = gauss_hermite_expectation_adaptive(g1, 200);
    double e2 = gauss_hermite_expectation_adaptive(g2, 200);
    return am * std::log(M / alpha) - (1.0 - am) * std::log1p(-am) - am * e1 -
           (1.0 - am) * (e2 - ln_Ma_m1);
}

double mutual_info(PotentialKind kind, double tau, const SystemConfig& cfg,
                   const PotentialOptions& opts, const BayesMiSampler* sampler) {
    if (!(tau > 0.0)) throw std::invalid_argument("mutual_info: tau <= 0");
    if (cfg.alpha == 0.0) return 0.0;
    if (kind == PotentialKind::marginal) return marginal_mutual_info(tau, cfg.E(), cfg.alpha, cfg.M());
    if (sampler) return sampler->eval(tau, cfg.E(), cfg.alpha);
    BayesMiSampler local(cfg.k, opts);
    return local.eval(tau, cfg.E(), cfg.alpha);
}

double potential(PotentialKind kind, double psi, double mu, double sigma2,
                 const SystemConfig& cfg, const PotentialOptions& opts,
                 const BayesMiSampler* sampler) {
    double tau = sigma2 + mu * psi;
    double I = mutual_info(kind, tau, cfg, opts, sampler);
    double pre = kind == PotentialKind::bayes ? 1.0 / (2.0 * mu) : 1.0 / (2.0 * mu * cfg.M());
    return I + pre * (std::log(tau / sigma2) - mu * psi / tau);
}

// ------------------------------------------------------------- minimizers

std::vector<Minimizer> local_minimizers(PotentialKind kind, double mu, double sigma2,
                                        const SystemConfig& cfg, const PotentialOptions& opts,
                                        const BayesMiSampler* sampler) {
    const double E = cfg.E();
    const int N = std::max(opts.grid, 8);
    std::vector<double> psi(N), val(N);
    for (int i = 0; i < N; ++i)
        psi[i] = E * std::pow(10.0, -7.0 + 7.0 * i / (N - 1));
    auto F = [&](double p) { return potential(kind, p, mu, sigma2, cfg, opts, sampler); };
    parallel_for(N, opts.threads, [&](std::size_t i) { val[i] = F(psi[i]); });

    std::vector<Minimizer> out;
    auto refine = [&](int i) {
        double lo = psi[std::max(0, i - 1)];
        double hi = psi[std::min(N - 1, i + 1)];
        if (!(lo < hi)) {
            out.push_back({psi[i], val[i]});
            return;
        }
        auto r = golden_section_min(F, lo, hi, opts.refine_tol * E);
        // keep the grid point on ties so flat regions resolve to their right edge
        if (r.value < val[i]) out.push_back({r.x, r.value});
        else out.push_back({psi[i], val[i]});
    };
    for (int i = 0; i < N; ++i) {
        bool left_ok = (i == 0) || val[i] <= val[i - 1];
        bool right_ok = (i == N - 1) || val[i] < val[i + 1];
        if (left_ok && right_ok) refine(i);
    }
    if (out.empty()) {
        int best = static_cast<int>(std::min_element(val.begin(), val.end()) - val.begin());
        refine(best);
    }
    return out;
}

double largest_minimizer(PotentialKind kind, double mu, double sigma2,
                         const SystemConfig& cfg, const PotentialOptions& opts,
                         const BayesMiSampler* sampler) {
    auto mins = local_minimizers(kind, mu, sigma2, cfg, opts, sampler);
    double fmin = kInf;
    for (const auto& m : mins) fmin = std::min(fmin, m.value);
    double best_psi = 0.0;
    for (const auto& m : mins)
        if (m.value <= fmin + opts.min_merge_tol) best_psi = std::max(best_psi, m.psi);
    return best_psi;
}

PotentialEval evaluate_potential(PotentialKind kind, double mu, double sigma2,
                                 const SystemConfig& cfg, const PotentialOptions& opts,
                                 const BayesMiSampler* sampler) {
    PotentialEval ev;
    ev.kind = kind;
    ev.mu = mu;
    ev.sigma2 = sigma2;
    const double E = cfg.E();
    const int N = std::max(opts.grid, 8);
    ev.psi_grid.resize(N);
    ev.values.resize(N);
    for (int i = 0; i < N; ++i)
        ev.psi_grid[i] = E * std::pow(10.0, -7.0 + 7.0 * i / (N - 1));
    parallel_for(N, opts.threads, [&](std::size_t i) {
        ev.values[i] = potential(kind, ev.psi_grid[i], mu, sigma2, cfg, opts, sampler);
    });
    ev.minimizer = largest_minimizer(kind, mu, sigma2, cfg, opts, sampler);
    ev.tau_bar = sigma2 + mu * (ev.minimizer + ev.epsilon_slack);
    return ev;
}

// --------------------------------------------------- Theorem-2 error terms

namespace {

double xi_of_tau(double tau, const SystemConfig& cfg) {
    // ln((M/alpha)(1-alpha)) / sqrt(E/tau)
    double lnarg = cfg.k * 0.6931471805599453094 - std::log(cfg.alpha) + std::log1p(-cfg.alpha);
    return lnarg / std::sqrt(cfg.E() / tau);
}

}  // namespace

double prob_hard_zero_given_active(double tau, const SystemConfig& cfg) {
    double h = 0.5 * std::sqrt(cfg.E() / tau);
    double xi = xi_of_tau(tau, cfg);
    double lp = log_std_normal_cdf(xi - h) + (cfg.M() - 1.0) * log_std_normal_cdf(xi + h);
    return std::exp(lp);
}

double prob_hard_wrong_given_active(double tau, const SystemConfig& cfg) {
    double h = 0.5 * std::sqrt(cfg.E() / tau);
    double xi = xi_of_tau(tau, cfg);
    double z0 = xi - h;  // for z >= z0 the max is z + 2h
    double head = std_normal_cdf(z0) * one_minus_cdf_pow(xi + h, cfg.M() - 1.0);
    return head + integrate_sigmoid_tail(2.0 * h, cfg.M() - 1.0, z0);
}

double prob_hard_nonzero_given_silent(double tau, const SystemConfig& cfg) {
    double h = 0.5 * std::sqrt(cfg.E() / tau);
    double xi = xi_of_tau(tau, cfg);
    return one_minus_cdf_pow(xi + h, cfg.M());
}

ErrorTriple asymptotic_error_triple(double tau, const SystemConfig& cfg) {
    if (!(tau > 0.0)) throw std::invalid_argument("asymptotic_error_triple: tau <= 0");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw std::invalid_argument("asymptotic_error_triple: alpha must be in (0,1); use pupe_alpha1 for alpha=1");
    ErrorTriple e;
    e.p_md = prob_hard_zero_given_active(tau, cfg);
    e.p_aue = prob_hard_wrong_given_active(tau, cfg);
    double num = 1.0 - e.p_md;
    double den = prob_hard_nonzero_given_silent(tau, cfg);
    if (den <= 0.0) {
        e.p_fa = 0.0;
    } else {
        e.p_fa = 1.0 / (cfg.alpha * num / ((1.0 - cfg.alpha) * den) + 1.0);
    }
    return e.clipped();
}

double pupe_alpha1(double tau, const SystemConfig& cfg) {
    if (!(tau > 0.0)) throw std::invalid_argument("pupe_alpha1: tau <= 0");
    double a = std::sqrt(cfg.E() / tau);
    return std::min(1.0, integrate_sigmoid_tail(a, cfg.M() - 1.0, -kInf));
}

// ------------------------------------------------------------ region sweep

double combined_bound_at_mu(PotentialKind kind, double mu, const SystemConfig& cfg,
                            const PotentialOptions& opts, double theta,
                            BayesMiSampler* sampler) {
    double mu_in = theta * mu;
    double m = largest_minimizer(kind, mu_in, cfg.sigma2, cfg, opts, sampler);
    double tau_bar = cfg.sigma2 + mu_in * m;
    if (cfg.alpha >= 1.0) return pupe_alpha1(tau_bar, cfg);
    return asymptotic_error_triple(tau_bar, cfg).combined();
}

std::vector<RegionPoint> sweep_achievable_region(const SystemConfig& cfg_template,
                                                 double target_error,
                                                 const std::vector<double>& ebn0_grid_db,
                                                 double mu_lo, double mu_hi,
                                                 PotentialKind kind,
                                                 const PotentialOptions& opts,
                                                 double theta) {
    if (!(mu_lo > 0.0 && mu_lo < mu_hi))
        throw std::invalid_argument("sweep_achievable_region: bad mu bracket");
    std::vector<RegionPoint> out(ebn0_grid_db.size());
    PotentialOptions inner = opts;
    inner.threads = 1;
    parallel_for(ebn0_grid_db.size(), opts.threads, [&](std::size_t i) {
        SystemConfig cfg = cfg_template.with_ebn0_db(ebn0_grid_db[i]);
        std::unique_ptr<BayesMiSampler> sampler;
        if (kind == PotentialKind::bayes)
            sampler = std::make_unique<BayesMiSampler>(cfg.k, inner);
        auto pred = [&](double mu) {
            return combined_bound_at_mu(kind, mu, cfg, inner, theta, sampler.get()) <= target_error;
        };
        RegionPoint pt;
        pt.ebn0_db = ebn0_grid_db[i];
        if (!pred(mu_lo)) {
            pt.mu_a_max = 0.0;
            pt.bracketed = false;
        } else if (pred(mu_hi)) {
            pt.mu_a_max = cfg.alpha * mu_hi;
            pt.bracketed = false;
        } else {
            auto r = bisect_largest_true(pred, mu_lo, mu_hi, 50);
            pt.mu_a_max = cfg.alpha * r.x;
        }
        out[i] = pt;
    });
    return out;
}

}  // namespace maclab
