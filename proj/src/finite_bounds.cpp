#include "maclab/finite_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <unordered_map>

#include "maclab/common.hpp"
#include "maclab/optimize.hpp"
#include "maclab/special.hpp"

namespace maclab {

namespace {

struct AB {
    double a = 0.0, b = 0.0;
    bool ok = false;  // false when a log argument left its domain
};

AB eval_ab(double rho, double lambda, double Pp, long long t, long long that) {
    AB r;
    double u = 1.0 + Pp * that * lambda;
    if (!(u > 0.0)) return r;
    double chi = rho * lambda / u;
    double v = 1.0 + Pp * t * chi;
    if (!(v > 0.0)) return r;
    r.a = rho * std::log(u) + std::log(v);
    r.b = rho * lambda - chi / v;
    r.ok = true;
    return r;
}

// max over rho1 in [0, 1] of rho1*A + ln(1 - rho1*B); concave in rho1.
double best_rho1_value(double A, double B) {
    double r1max = 1.0;
    if (B > 0.0) r1max = std::min(1.0, (1.0 - 1e-12) / B);
    auto val = [&](double r1) {
        double arg = 1.0 - r1 * B;
        return arg > 0.0 ? r1 * A + std::log(arg) : -kInf;
    };
    double best = std::max(0.0, val(r1max));
    if (A != 0.0 && B != 0.0) {
        double r1s = 1.0 / B - 1.0 / A;
        if (r1s > 0.0 && r1s < r1max) best = std::max(best, val(r1s));
    }
    return best;
}

// Log-stretched lambda candidates around the characteristic scale.
std::vector<double> lambda_grid(double Pp, long long t, long long that) {
    double s0 = 1.0 / (1.0 + Pp * static_cast<double>(t + that));
    std::vector<double> g;
    g.push_back(0.0);
    for (int i = 0; i < 25; ++i) {
        double mag = s0 * std::pow(10.0, -4.0 + 8.0 * i / 24.0);
        g.push_back(mag);
        g.push_back(-mag);
    }
    if (that > 0) {
        double lmin = -1.0 / (Pp * that);
        std::erase_if(g, [&](double l) { return l <= lmin * (1.0 - 1e-12); });
    }
    std::sort(g.begin(), g.end());
    return g;
}

// max over feasible lambda of obj(lambda); scan + golden refinement.
template <class Obj>
double max_over_lambda(Obj&& obj, double Pp, long long t, long long that) {
    auto grid = lambda_grid(Pp, t, that);
    std::size_t best = 0;
    double fbest = -kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double v = obj(grid[i]);
        if (v > fbest) { fbest = v; best = i; }
    }
    if (!std::isfinite(fbest)) return fbest;
    double lo = grid[best == 0 ? 0 : best - 1];
    double hi = grid[std::min(best + 1, grid.size() - 1)];
    if (lo < hi) {
        auto r = golden_section_max(obj, lo, hi, 1e-10 * (1.0 + std::fabs(hi - lo)));
        fbest = std::max(fbest, r.value);
    }
    return fbest;
}

struct CellGeometry {
    long long ukap, okap, minko;
    long long that_lo, that_hi;  // range of that given t (empty when lo > hi)
};

CellGeometry cell_geometry(long long ka, long long kap, const FiniteBoundConfig& fbc) {
    CellGeometry g;
    g.ukap = std::max(fbc.kl, kap - fbc.rl);
    g.okap = std::min(fbc.ku, kap + fbc.ru);
    g.minko = std::min(ka, g.okap);
    g.that_lo = 0;
    g.that_hi = -1;
    return g;
}

void that_range(const CellGeometry& g, long long ka, long long t, long long& lo, long long& hi) {
    long long a = std::max<long long>(0, ka - g.okap);
    long long b = std::max<long long>(0, ka - g.ukap);
    long long c = std::max<long long>(0, g.okap - ka);
    long long d = std::max<long long>(0, g.ukap - ka);
    lo = std::max<long long>(0, t + a - b);
    hi = std::min(g.okap - d, t + c - d);
}

// Normalized nu weights collapse to the conditional mean of psi because every
// Delta term is affine in psi.
struct NuStats {
    double mean_psi = 0.0;
};

NuStats nu_stats(long long tmin, long long Rcal, double lnM, double lnM1) {
    NuStats st;
    long long psiu = std::min(tmin, Rcal - tmin);
    if (tmin == 0 || psiu < 0) return st;
    std::vector<double> lw(psiu + 1);
    for (long long psi = 0; psi <= psiu; ++psi) {
        double t1 = lchoose(static_cast<double>(Rcal - tmin), static_cast<double>(psi));
        double t2 = lchoose(static_cast<double>(tmin), static_cast<double>(tmin - psi));
        double m1 = psi > 0 ? psi * lnM : 0.0;
        double m2 = tmin - psi > 0 ? (tmin - psi) * lnM1 : 0.0;
        lw[psi] = t1 + t2 + m1 + m2;
    }
    double lz = logsumexp(lw);
    double acc = 0.0;
    for (long long psi = 0; psi <= psiu; ++psi) acc += psi * std::exp(lw[psi] - lz);
    st.mean_psi = acc;
    return st;
}

// Memoized evaluator for one (config, P') pair.
class BoundEvaluator {
public:
    explicit BoundEvaluator(const FiniteBoundConfig& fbc)
        : fbc_(fbc),
          n_(static_cast<double>(fbc.cfg.n)),
          Pp_(fbc.pprime),
          lnM_(fbc.cfg.k * 0.6931471805599453094),
          lnM1_(lnM_ + std::log1p(-std::exp2(-static_cast<double>(fbc.cfg.k)))) {}

    double xi(long long ka, long long kap) {
        long long width = fbc_.ku - fbc_.kl + 1;
        long long key = (ka - fbc_.kl) * width + (kap - fbc_.kl);
        auto it = xi_memo_.find(key);
        if (it != xi_memo_.end()) return it->second;
        double v = xi_impl(ka, kap);
        xi_memo_.emplace(key, v);
        return v;
    }

    // E(t, that); the (ka, kap) dependence enters through minko, Rcal, P1.
    double exponent(long long t, long long that, long long minko, long long Rcal,
                    long long p1_units) {
        std::uint64_t key = pack(t, that, minko, Rcal, p1_units);
        auto it = e_memo_.find(key);
        if (it != e_memo_.end()) return it->second;
        double v = exponent_impl(t, that, minko, Rcal, p1_units);
        e_memo_.emplace(key, v);
        return v;
    }

    double p_tt(long long t, long long that, long long minko, long long Rcal,
                long long p1_units) {
        double E = exponent(t, that, minko, Rcal, p1_units);
        double p = std::exp(-0.5 * n_ * E);
        return std::min(1.0, std::max(0.0, p));
    }

    const NuStats& nu(long long tmin, long long Rcal) {
        std::uint64_t key = (static_cast<std::uint64_t>(tmin) << 32) |
                            static_cast<std::uint64_t>(Rcal);
        auto it = nu_memo_.find(key);
        if (it == nu_memo_.end())
            it = nu_memo_.emplace(key, nu_stats(tmin, Rcal, lnM_, lnM1_)).first;
        return it->second;
    }

    long long skipped_cells() const { return skipped_; }
    void note_skip() { ++skipped_; }

private:
    static std::uint64_t pack(long long t, long long that, long long minko, long long Rcal,
                              long long p1) {
        return (static_cast<std::uint64_t>(t) << 48) | (static_cast<std::uint64_t>(that) << 36) |
               (static_cast<std::uint64_t>(minko) << 24) |
               (static_cast<std::uint64_t>(Rcal) << 8) | static_cast<std::uint64_t>(p1);
    }

    double xi_impl(long long ka, long long kap) const {
        if (fbc_.kl == fbc_.ku) return 1.0;  // no competing hypothesis
        double best = kInf;
        double ka_fac = 1.0 + ka * Pp_;
        double y = 1.0 + kap * Pp_;
        for (long long kappa = fbc_.kl; kappa <= fbc_.ku; ++kappa) {
            if (kappa == kap) continue;
            double x = 1.0 + kappa * Pp_;
            double diff = (kappa - kap) * Pp_;
            double zeta = n_ / (2.0 * ka_fac) * std::log1p(diff / y) * (x * y / diff);
            double v = kappa < kap ? regularized_gamma_upper(0.5 * n_, zeta)
                                   : regularized_gamma_lower(0.5 * n_, zeta);
            best = std::min(best, v);
        }
        return best;
    }

    double exponent_impl(long long t, long long that, long long minko, long long Rcal,
                         long long p1_units) const {
        long long tmin = std::min(t, that);
        double R1 = (2.0 / n_) * (tmin * lnM_ +
                                  lchoose(static_cast<double>(Rcal), static_cast<double>(tmin)));
        double R2 =
            (2.0 / n_) * lchoose(static_cast<double>(minko), static_cast<double>(t));
        double P1 = p1_units * Pp_ + 1.0;
        auto h_of_rho = [&](double rho) {
            auto obj = [&](double lambda) {
                AB ab = eval_ab(rho, lambda, Pp_, t, that);
                if (!ab.ok) return -kInf;
                double A = -rho * R1 - R2 + ab.a;
                return best_rho1_value(A, P1 * ab.b);
            };
            return max_over_lambda(obj, Pp_, t, that);
        };
        double best = 0.0;  // rho1 = 0 gives 0
        double fbest = h_of_rho(0.0);
        best = std::max(best, fbest);
        int grid_n = 16;
        int best_i = 0;
        std::vector<double> vals(grid_n + 1);
        vals[0] = fbest;
        for (int i = 1; i <= grid_n; ++i) {
            double rho = static_cast<double>(i) / grid_n;
            vals[i] = h_of_rho(rho);
            if (vals[i] > vals[best_i]) best_i = i;
        }
        best = std::max(best, vals[best_i]);
        double lo = std::max(0.0, (best_i - 1.0) / grid_n);
        double hi = std::min(1.0, (best_i + 1.0) / grid_n);
        if (lo < hi) {
            auto r = golden_section_max(h_of_rho, lo, hi, 1e-6);
            best = std::max(best, r.value);
        }
        return best;
    }

    const FiniteBoundConfig& fbc_;
    double n_, Pp_, lnM_, lnM1_;
    std::unordered_map<long long, double> xi_memo_;
    std::unordered_map<std::uint64_t, double> e_memo_;
    std::unordered_map<std::uint64_t, NuStats> nu_memo_;
    long long skipped_ = 0;
};

}  // namespace

double compute_tilde_p(const FiniteBoundConfig& fbc) {
    fbc.validate();
    double tail = fbc.activity.tail_outside(fbc.kl, fbc.ku);
    double n2 = 0.5 * static_cast<double>(fbc.cfg.n);
    double gamma_term = regularized_gamma_upper(n2, n2 * fbc.P() / fbc.pprime);
    return tail + fbc.activity.mean() * gamma_term;
}

double compute_E0(double rho, double rho1, long long t, long long that,
                  const FiniteBoundConfig& fbc, long long ka, long long kap) {
    fbc.validate();
    if (!(rho >= 0.0 && rho <= 1.0 && rho1 >= 0.0 && rho1 <= 1.0))
        throw std::invalid_argument("compute_E0: rho, rho1 must be in [0,1]");
    CellGeometry g = cell_geometry(ka, kap, fbc);
    double P1 = (std::max<long long>(0, ka - g.okap) + std::max<long long>(0, g.ukap - ka)) *
                    fbc.pprime +
                1.0;
    auto obj = [&](double lambda) {
        AB ab = eval_ab(rho, lambda, fbc.pprime, t, that);
        if (!ab.ok) return -kInf;
        double arg = 1.0 - rho1 * P1 * ab.b;
        return arg > 0.0 ? rho1 * ab.a + std::log(arg) : -kInf;
    };
    return max_over_lambda(obj, fbc.pprime, t, that);
}

double compute_p_t_that(long long t, long long that, const FiniteBoundConfig& fbc, long long ka,
                        long long kap) {
    fbc.validate();
    CellGeometry g = cell_geometry(ka, kap, fbc);
    if (t < 0 || t > g.minko) throw std::invalid_argument("compute_p_t_that: t out of range");
    long long lo, hi;
    that_range(g, ka, t, lo, hi);
    if (that < lo || that > hi) throw std::invalid_argument("compute_p_t_that: that out of range");
    long long tmin = std::min(t, that);
    long long Rcal = fbc.cfg.L - ka + tmin - std::max<long long>(0, g.ukap - ka) -
                     std::max<long long>(0, that - t);
    long long p1_units =
        std::max<long long>(0, ka - g.okap) + std::max<long long>(0, g.ukap - ka);
    BoundEvaluator ev(fbc);
    return ev.p_tt(t, that, g.minko, Rcal, p1_units);
}

double compute_xi(long long ka, long long kap, const FiniteBoundConfig& fbc) {
    fbc.validate();
    if (ka < fbc.kl || ka > fbc.ku || kap < fbc.kl || kap > fbc.ku)
        throw std::invalid_argument("compute_xi: ka, kap must be in [kl:ku]");
    BoundEvaluator ev(fbc);
    return ev.xi(ka, kap);
}

std::pair<double, double> compute_nu(long long tmin, long long psi, long long Rcal, double M) {
    long long psiu = std::min(tmin, Rcal - tmin);
    if (psi < 0 || psi > psiu) throw std::invalid_argument("compute_nu: psi out of [0, psiu]");
    double lnM = std::log(M);
    double lnM1 = M > 1.0 ? std::log(M - 1.0) : -kInf;
    auto lw = [&](long long p) {
        double m1 = p > 0 ? p * lnM : 0.0;
        double m2 = 0.0;
        if (tmin - p > 0) m2 = lnM1 == -kInf ? -kInf : (tmin - p) * lnM1;
        return lchoose(static_cast<double>(Rcal - tmin), static_cast<double>(p)) +
               lchoose(static_cast<double>(tmin), static_cast<double>(tmin - p)) + m1 + m2;
    };
    std::vector<double> all(psiu + 1);
    for (long long p = 0; p <= psiu; ++p) all[p] = lw(p);
    return {lw(psi), logsumexp(all)};
}

BoundTriple compute_bound_triple(const FiniteBoundConfig& fbc) {
    fbc.validate();
    if (fbc.cfg.L > 200)
        throw std::invalid_argument("compute_bound_triple: L <= 200 enforced (O(L^5) cost)");
    BoundEvaluator ev(fbc);
    const double tp = compute_tilde_p(fbc);
    double md = 0.0, fa = 0.0, aue = 0.0;
    long long warned = 0;

    for (long long ka = fbc.kl; ka <= fbc.ku; ++ka) {
        double pka = fbc.activity.pmf(ka);
        if (pka <= 0.0) continue;
        for (long long kap = fbc.kl; kap <= fbc.ku; ++kap) {
            CellGeometry g = cell_geometry(ka, kap, fbc);
            double xi = ev.xi(ka, kap);
            long long i_md = std::max<long long>(0, ka - g.okap);
            long long i_fa = std::max<long long>(0, g.ukap - ka);
            // min{p, xi} <= xi: skip pairs that cannot move the sums
            if (pka * xi * 3.0 * (g.minko + 1) * (fbc.ku - fbc.kl + 1) *
                    (2.0 * fbc.cfg.L) <
                1e-22)
                continue;
            for (long long t = 0; t <= g.minko; ++t) {
                long long lo, hi;
                that_range(g, ka, t, lo, hi);
                for (long long that = std::max<long long>(0, lo); that <= hi; ++that) {
                    long long tmin = std::min(t, that);
                    long long Rcal = fbc.cfg.L - ka + tmin - i_fa -
                                     std::max<long long>(0, that - t);
                    if (Rcal < tmin) {
                        if (warned++ < 5)
                            std::cerr << "compute_bound_triple: skipping cell with Rcal < tmin "
                                         "(ka=" << ka << " kap=" << kap << " t=" << t
                                      << " that=" << that << ")\n";
                        ev.note_skip();
                        continue;
                    }
                    long long p1_units = i_md + i_fa;
                    double p = ev.p_tt(t, that, g.minko, Rcal, p1_units);
                    double m = std::min(p, xi);
                    if (m * pka * 2.0 * fbc.cfg.L < 1e-22) continue;
                    const NuStats& nu = ev.nu(tmin, Rcal);
                    double epsi = nu.mean_psi;
                    if (ka > 0) {
                        md += pka * m * ((i_md + std::max<long long>(0, t - that)) + epsi) / ka;
                        aue += pka * m * (tmin - epsi) / ka;
                    }
                    double den = static_cast<double>(ka - t - i_md + that + i_fa);
                    if (den > 0.0)
                        fa += pka * m * ((i_fa + std::max<long long>(0, that - t)) + epsi) / den;
                }
            }
        }
    }
    BoundTriple out;
    out.md = std::min(1.0, tp + md);
    out.fa = std::min(1.0, tp + fa);
    out.aue = std::min(1.0, tp + aue);
    return out;
}

BoundTriple compute_error_floors(const FiniteBoundConfig& fbc) {
    fbc.validate();
    BoundEvaluator ev(fbc);
    double pbar = fbc.activity.tail_outside(fbc.kl, fbc.ku);
    double md = 0.0, fa = 0.0;
    for (long long ka = fbc.kl; ka <= fbc.ku; ++ka) {
        double pka = fbc.activity.pmf(ka);
        if (pka <= 0.0) continue;
        for (long long kap = fbc.kl; kap <= fbc.ku; ++kap) {
            CellGeometry g = cell_geometry(ka, kap, fbc);
            long long i_md = std::max<long long>(0, ka - g.okap);
            long long i_fa = std::max<long long>(0, g.ukap - ka);
            if (i_md == 0 && i_fa == 0) continue;
            double xi = ev.xi(ka, kap);
            if (ka > 0 && i_md > 0) md += pka * xi * static_cast<double>(i_md) / ka;
            double den = static_cast<double>(ka - i_md + i_fa);
            if (i_fa > 0 && den > 0.0) fa += pka * xi * static_cast<double>(i_fa) / den;
        }
    }
    BoundTriple out;
    out.md = std::min(1.0, md + pbar);
    out.fa = std::min(1.0, fa + pbar);
    out.aue = std::min(1.0, pbar);
    return out;
}

BoundTriple optimize_pprime(FiniteBoundConfig& fbc, double rel_tol) {
    const double P = fbc.P();
    auto objective = [&](double pp) {
        FiniteBoundConfig tmp = fbc;
        tmp.pprime = pp;
        return compute_bound_triple(tmp).combined();
    };
    // coarse scan first: the objective plateaus at the clip value over wide
    // P' ranges, which golden section alone cannot cross
    std::vector<double> grid;
    for (double f = 0.05; f < 0.99; f += 0.09) grid.push_back(f * P);
    auto r = scan_then_golden_max([&](double pp) { return -objective(pp); }, grid, rel_tol * P);
    fbc.pprime = r.x;
    return compute_bound_triple(fbc);
}

// ------------------------------------------------------------------ oracle

TinyInstance sample_tiny_instance(const FiniteBoundConfig& fbc, Rng& rng) {
    fbc.validate();
    const long long L = fbc.cfg.L, n = fbc.cfg.n;
    const long long M = fbc.cfg.M_int();
    if (L > 8 || M > 4) throw std::invalid_argument("sample_tiny_instance: L <= 8, M <= 4");
    TinyInstance inst;
    inst.codebooks.resize(L);
    const double sd = std::sqrt(fbc.pprime);
    const double cap = fbc.cfg.n * fbc.P();  // Eb*k
    Rng crng = rng.substream(1);
    for (long long l = 0; l < L; ++l) {
        Eigen::MatrixXd cb(n, M);
        for (long long j = 0; j < M; ++j) {
            for (long long i = 0; i < n; ++i) cb(i, j) = sd * crng.normal();
            if (cb.col(j).squaredNorm() > cap) cb.col(j).setZero();
        }
        inst.codebooks[l] = std::move(cb);
    }
    Rng wrng = rng.substream(2);
    inst.sent.assign(L, -1);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    for (long long l = 0; l < L; ++l) {
        if (wrng.bernoulli(fbc.cfg.alpha)) {
            int j = static_cast<int>(wrng.below(M));
            inst.sent[l] = j;
            ++inst.Ka;
            sum += inst.codebooks[l].col(j);
        }
    }
    Rng nrng = rng.substream(3);
    inst.y = sum;
    for (long long i = 0; i < n; ++i) inst.y(i) += nrng.normal();
    return inst;
}

namespace {

struct OracleSearch {
    const TinyInstance& inst;
    long long lo, hi;
    long long L, M, n;
    std::vector<int> current, best;
    double best_cost = kInf;

    void dfs(long long l, long long active, Eigen::VectorXd& resid) {
        if (l == L) {
            if (active < lo || active > hi) return;
            double cost = resid.squaredNorm();
            if (cost < best_cost) {
                best_cost = cost;
                best = current;
            }
            return;
        }
        // feasibility pruning on the final set size
        if (active > hi) return;
        if (active + (L - l) < lo) return;
        current[l] = -1;
        dfs(l + 1, active, resid);
        for (int j = 0; j < M; ++j) {
            current[l] = j;
            resid -= inst.codebooks[l].col(j);
            dfs(l + 1, active + 1, resid);
            resid += inst.codebooks[l].col(j);
        }
        current[l] = -1;
    }
};

}  // namespace

std::vector<int> ml_oracle_decode(const TinyInstance& inst, const FiniteBoundConfig& fbc) {
    const long long L = static_cast<long long>(inst.codebooks.size());
    const long long M = inst.codebooks.empty() ? 0 : inst.codebooks[0].cols();
    const long long n = inst.y.size();
    if (L > 8 || M > 4) throw std::invalid_argument("ml_oracle_decode: L <= 8, M <= 4");

    // ML estimate of the active-user count: y | Ka=K ~ N(0, (1+K P') I)
    double ynorm2 = inst.y.squaredNorm();
    long long best_K = fbc.kl;
    double best_ll = -kInf;
    for (long long K = fbc.kl; K <= fbc.ku; ++K) {
        double var = 1.0 + K * fbc.pprime;
        double ll = -0.5 * n * std::log(var) - 0.5 * ynorm2 / var;
        if (ll > best_ll) {
            best_ll = ll;
            best_K = K;
        }
    }

    OracleSearch search{inst,
                        std::max(fbc.kl, best_K - fbc.rl),
                        std::min(fbc.ku, best_K + fbc.ru),
                        L,
                        M,
                        n,
                        std::vector<int>(L, -1),
                        std::vector<int>(L, -1),
                        kInf};
    Eigen::VectorXd resid = inst.y;
    search.dfs(0, 0, resid);
    return search.best;
}

}  // namespace maclab
