#include <doctest.h>

#include <cmath>
#include <vector>

#include "maclab/finite_bounds.hpp"
#include "maclab/special.hpp"

using namespace maclab;

namespace {

FiniteBoundConfig small_config(long long n, long long L, int k, double alpha, double ebn0_db,
                               double pbar, long long rl, long long ru, double pp_frac = 0.8) {
    FiniteBoundConfig fbc;
    fbc.cfg = SystemConfig::dimensioned(n, L, k, alpha, ebn0_db);
    fbc.activity = ActivityModel::binomial(alpha, L);
    std::tie(fbc.kl, fbc.ku) = fbc.activity.choose_range(pbar);
    fbc.rl = rl;
    fbc.ru = ru;
    fbc.pprime = pp_frac * fbc.P();
    return fbc;
}

unsigned __int128 binom128(int n, int k) {
    if (k < 0 || k > n) return 0;
    unsigned __int128 r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

unsigned __int128 ipow128(unsigned __int128 b, int e) {
    unsigned __int128 r = 1;
    while (e-- > 0) r *= b;
    return r;
}

// Brute-force enumeration of the model behind nu(tmin, psi): psi codeword
// picks from distinct silent codebooks (M choices each) and tmin - psi wrong
// picks from distinct active codebooks (M - 1 choices each).
long long enumerate_nu(int tmin, int psi, int Rcal, int M) {
    int silent = Rcal - tmin;
    long long count = 0;
    for (int mask = 0; mask < (1 << silent); ++mask) {
        if (__builtin_popcount(mask) != psi) continue;
        for (int mask2 = 0; mask2 < (1 << tmin); ++mask2) {
            if (__builtin_popcount(mask2) != tmin - psi) continue;
            long long ways = 1;
            for (int i = 0; i < psi; ++i) ways *= M;
            for (int i = 0; i < tmin - psi; ++i) ways *= (M - 1);
            count += ways;
        }
    }
    return count;
}

}  // namespace

TEST_CASE("tilde_p components") {
    auto fbc = small_config(2000, 50, 8, 0.5, 10.0, 1e-13, 0, 0);
    FiniteBoundConfig lo = fbc;
    lo.pprime = 1e-6 * fbc.P();
    double tail = fbc.activity.tail_outside(fbc.kl, fbc.ku);
    CHECK(tail <= 1e-13);
    CHECK(compute_tilde_p(lo) == doctest::Approx(tail).epsilon(1e-9));
    // P' -> P: gamma term approaches E[Ka]/2 (median of Gamma(n/2) ~ n/2)
    FiniteBoundConfig hi = fbc;
    hi.pprime = (1.0 - 1e-9) * fbc.P();
    double tp = compute_tilde_p(hi);
    CHECK(tp > 0.4 * fbc.activity.mean());
    CHECK(tp < 0.55 * fbc.activity.mean());
}

TEST_CASE("E0 trivial values") {
    auto fbc = small_config(400, 20, 2, 0.5, 6.0, 1e-6, 1, 1);
    long long ka = 10, kap = 9;
    CHECK(compute_E0(0.7, 0.3, 0, 0, fbc, ka, kap) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(compute_E0(0.0, 0.0, 3, 2, fbc, ka, kap) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(compute_E0(0.5, 0.5, 2, 2, fbc, ka, kap) >= 0.0);
    CHECK_THROWS(compute_E0(1.5, 0.5, 2, 2, fbc, ka, kap));
}

TEST_CASE("E0 matches a dense lambda grid") {
    auto fbc = small_config(100, 20, 2, 0.5, 4.0, 1e-5, 1, 1);
    Rng rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        long long ka = fbc.kl + static_cast<long long>(rng.below(fbc.ku - fbc.kl + 1));
        long long kap = fbc.kl + static_cast<long long>(rng.below(fbc.ku - fbc.kl + 1));
        long long t = 1 + static_cast<long long>(rng.below(4));
        long long that = 1 + static_cast<long long>(rng.below(4));
        double rho = rng.uniform(), rho1 = rng.uniform();
        double got = compute_E0(rho, rho1, t, that, fbc, ka, kap);

        double Pp = fbc.pprime;
        long long i_md = std::max<long long>(0, ka - std::min(fbc.ku, kap + fbc.ru));
        long long i_fa = std::max<long long>(0, std::max(fbc.kl, kap - fbc.rl) - ka);
        double P1 = (i_md + i_fa) * Pp + 1.0;
        double best = 0.0;  // lambda = 0
        for (int i = 0; i <= 10000; ++i) {
            double mag = std::pow(10.0, -6.0 + 10.0 * i / 10000.0) / (1.0 + Pp * (t + that));
            for (double lambda : {mag, -mag}) {
                if (that > 0 && lambda <= -1.0 / (Pp * that)) continue;
                double u = 1.0 + Pp * that * lambda;
                if (u <= 0.0) continue;
                double chi = rho * lambda / u;
                double v = 1.0 + Pp * t * chi;
                if (v <= 0.0) continue;
                double a = rho * std::log(u) + std::log(v);
                double b = rho * lambda - chi / v;
                double arg = 1.0 - rho1 * P1 * b;
                if (arg <= 0.0) continue;
                best = std::max(best, rho1 * a + std::log(arg));
            }
        }
        CHECK(got >= best - 1e-6);
        CHECK(got <= best + 1e-3 + 1e-6 * std::fabs(best));
    }
}

TEST_CASE("p(t, that) is a probability and decreases with n") {
    for (long long n : {500, 1000, 2000}) {
        auto fbc = small_config(n, 20, 3, 0.5, 6.0, 1e-5, 1, 1);
        for (long long t : {1, 2, 3}) {
            double p = compute_p_t_that(t, t, fbc, 10, 10);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
    double p500 = compute_p_t_that(2, 2, small_config(500, 20, 3, 0.5, 6.0, 1e-5, 1, 1), 10, 10);
    double p1000 = compute_p_t_that(2, 2, small_config(1000, 20, 3, 0.5, 6.0, 1e-5, 1, 1), 10, 10);
    double p2000 = compute_p_t_that(2, 2, small_config(2000, 20, 3, 0.5, 6.0, 1e-5, 1, 1), 10, 10);
    CHECK(p1000 <= p500 + 1e-12);
    CHECK(p2000 <= p1000 + 1e-12);
}

TEST_CASE("xi: direct formula, range, and n-monotonicity") {
    auto fbc = small_config(400, 20, 2, 0.5, 6.0, 1e-5, 1, 1);
    long long ka = 10, kap = 10;
    double xi = compute_xi(ka, kap, fbc);
    CHECK(xi > 0.0);
    CHECK(xi < 1.0);
    double manual = kInf;
    double n2 = 0.5 * fbc.cfg.n;
    for (long long kappa = fbc.kl; kappa <= fbc.ku; ++kappa) {
        if (kappa == kap) continue;
        double x = 1.0 + kappa * fbc.pprime, y = 1.0 + kap * fbc.pprime;
        double zeta = fbc.cfg.n / (2.0 * (1.0 + ka * fbc.pprime)) * std::log(x / y) /
                      (1.0 / y - 1.0 / x);
        double v = kappa < kap ? regularized_gamma_upper(n2, zeta)
                               : regularized_gamma_lower(n2, zeta);
        manual = std::min(manual, v);
    }
    CHECK(xi == doctest::Approx(manual).epsilon(1e-9));

    double prev = 1.0;
    for (long long n : {200, 400, 800}) {
        auto f = small_config(n, 20, 2, 0.5, 6.0, 1e-5, 1, 1);
        double v = compute_xi(10, 10, f);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }

    auto degen = small_config(400, 20, 2, 1.0, 6.0, 1e-5, 1, 1);
    CHECK(degen.kl == degen.ku);
    CHECK(compute_xi(20, 20, degen) == 1.0);
}

TEST_CASE("xi upper-bounds the Monte Carlo likelihood test") {
    auto fbc = small_config(200, 12, 2, 0.5, 8.0, 1e-4, 0, 0);
    Rng rng(7);
    const int N = 100000;
    long long ka = (fbc.kl + fbc.ku) / 2;
    std::vector<long long> counts(fbc.ku + 1, 0);
    double var = 1.0 + ka * fbc.pprime;
    for (int i = 0; i < N; ++i) {
        double ss = 0.0;
        for (long long j = 0; j < fbc.cfg.n; ++j) {
            double g = rng.normal();
            ss += var * g * g;
        }
        long long best = fbc.kl;
        double best_ll = -kInf;
        for (long long K = fbc.kl; K <= fbc.ku; ++K) {
            double v = 1.0 + K * fbc.pprime;
            double ll = -0.5 * fbc.cfg.n * std::log(v) - 0.5 * ss / v;
            if (ll > best_ll) {
                best_ll = ll;
                best = K;
            }
        }
        ++counts[best];
    }
    for (long long kap = fbc.kl; kap <= fbc.ku; ++kap) {
        if (kap == ka) continue;
        double p = static_cast<double>(counts[kap]) / N;
        double se = std::sqrt(std::max(p * (1 - p), 1e-12) / N);
        CHECK(p <= compute_xi(ka, kap, fbc) + 3.0 * se);
    }
}

TEST_CASE("nu values") {
    auto [lp0, l0] = compute_nu(0, 0, 5, 4.0);
    CHECK(lp0 == doctest::Approx(0.0));
    CHECK(l0 == doctest::Approx(0.0));
    // M = 1: zero unless psi = tmin
    auto [lp1, l1] = compute_nu(2, 1, 5, 1.0);
    CHECK(lp1 == -kInf);
    auto [lp2, l2] = compute_nu(2, 2, 5, 1.0);
    CHECK(std::isfinite(lp2));
    CHECK(lp2 == doctest::Approx(l2).epsilon(1e-12));
    // enumeration oracle at Rcal=5, tmin=2, M=4
    double total = 0.0;
    double lt_all = 0.0;
    for (int psi = 0; psi <= 2; ++psi) {
        auto [lp, lt] = compute_nu(2, psi, 5, 4.0);
        long long want = enumerate_nu(2, psi, 5, 4);
        CHECK(std::exp(lp) == doctest::Approx(static_cast<double>(want)).epsilon(1e-10));
        total += static_cast<double>(want);
        lt_all = lt;
    }
    CHECK(std::exp(lt_all) == doctest::Approx(total).epsilon(1e-10));
    CHECK_THROWS(compute_nu(2, 3, 5, 4.0));
}

TEST_CASE("nu Vandermonde identity in exact integers") {
    for (int Rcal = 1; Rcal <= 30; Rcal += 3) {
        for (int tmin = 0; tmin <= std::min(10, Rcal); ++tmin) {
            unsigned __int128 sum = 0;
            int psiu = std::min(tmin, Rcal - tmin);
            for (int psi = 0; psi <= psiu; ++psi)
                sum += binom128(Rcal - tmin, psi) * binom128(tmin, tmin - psi);
            CHECK(sum == binom128(Rcal, tmin));
            for (int M : {2, 16}) {
                unsigned __int128 nu_exact = 0;
                for (int psi = 0; psi <= psiu; ++psi)
                    nu_exact += binom128(Rcal - tmin, psi) * ipow128(M, psi) *
                                binom128(tmin, tmin - psi) * ipow128(M - 1, tmin - psi);
                unsigned __int128 cap = binom128(Rcal, tmin) * ipow128(M, tmin);
                CHECK(nu_exact <= cap);
                auto [lp, lt] = compute_nu(tmin, std::min(psiu, 1), Rcal, M);
                (void)lp;
                CHECK(std::exp(lt) ==
                      doctest::Approx(static_cast<double>(nu_exact)).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("bound triple is clipped to [0,1] on a config fuzz") {
    Rng rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        long long L = 10 + static_cast<long long>(rng.below(20));
        long long n = 200 + static_cast<long long>(rng.below(800));
        int k = 1 + static_cast<int>(rng.below(4));
        double alpha = 0.2 + 0.6 * rng.uniform();
        double db = -2.0 + 14.0 * rng.uniform();
        long long r = static_cast<long long>(rng.below(3));
        auto fbc = small_config(n, L, k, alpha, db, 1e-4, r, r);
        auto b = compute_bound_triple(fbc);
        double tp = compute_tilde_p(fbc);
        for (double v : {b.md, b.fa, b.aue}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(b.md >= std::min(1.0, tp) - 1e-12);
        CHECK(b.fa >= std::min(1.0, tp) - 1e-12);
    }
    auto big = small_config(1000, 500, 2, 0.5, 5.0, 1e-4, 0, 0);
    CHECK_THROWS(compute_bound_triple(big));  // L > 200 cost guard
}

TEST_CASE("floors: full radii give the tail mass, and delta prior gives zero") {
    auto fbc = small_config(400, 20, 2, 0.5, 8.0, 1e-4, 20, 20);
    auto f = compute_error_floors(fbc);
    double pbar = fbc.activity.tail_outside(fbc.kl, fbc.ku);
    CHECK(f.md == doctest::Approx(pbar).epsilon(1e-12));
    CHECK(f.fa == doctest::Approx(pbar).epsilon(1e-12));
    CHECK(f.aue == doctest::Approx(pbar).epsilon(1e-12));

    FiniteBoundConfig d;
    d.cfg = SystemConfig::dimensioned(400, 20, 2, 1.0, 8.0);
    d.activity = ActivityModel::binomial(1.0, 20);
    d.kl = d.ku = 20;
    d.rl = d.ru = 20;
    d.pprime = 0.8 * d.P();
    auto fd = compute_error_floors(d);
    CHECK(fd.md == 0.0);
    CHECK(fd.fa == 0.0);
    CHECK(fd.aue == 0.0);
}

TEST_CASE("bounds converge to the floors at high SNR") {
    auto fbc = small_config(600, 24, 3, 0.5, 24.0, 1e-6, 0, 0);
    auto b = compute_bound_triple(fbc);
    auto f = compute_error_floors(fbc);
    CHECK(b.md >= f.md - 1e-12);
    CHECK(b.fa >= f.fa - 1e-12);
    CHECK(b.md == doctest::Approx(f.md).epsilon(0.01));
    CHECK(b.fa == doctest::Approx(f.fa).epsilon(0.01));
    // asymmetric radii: rl=0, ru=2 controls MD more strictly than FA
    auto asym = small_config(600, 24, 3, 0.5, 24.0, 1e-6, 0, 2);
    auto ba = compute_bound_triple(asym);
    CHECK(ba.md < ba.fa);
}

TEST_CASE("floor contours at the L=600 operating point") {
    // mu_a = 0.112 -> n = 0.7*600/0.112 = 3750; the floor level decreases with
    // the decoding radius and passes through the reported 0.02 / 0.01 levels
    auto eval_floor = [&](double pbar, long long r) {
        FiniteBoundConfig fbc;
        fbc.cfg = SystemConfig::dimensioned(3750, 600, 6, 0.7, 40.0);
        fbc.activity = ActivityModel::binomial(0.7, 600);
        std::tie(fbc.kl, fbc.ku) = fbc.activity.choose_range(pbar);
        fbc.rl = fbc.ru = r;
        fbc.pprime = 0.8 * fbc.P();
        return compute_error_floors(fbc).combined();
    };
    double prev = 1.0;
    bool hits_002 = false;
    for (long long r : {0, 2, 5, 8, 11}) {
        double v = eval_floor(1e-3, r);
        CHECK(v <= prev + 1e-12);
        if (v >= 0.013 && v <= 0.027) hits_002 = true;
        prev = v;
    }
    CHECK(hits_002);
    bool hits_001 = false;
    for (long long r : {8, 11, 14}) {
        double v = eval_floor(1e-7, r);
        if (v >= 0.007 && v <= 0.016) hits_001 = true;
    }
    CHECK(hits_001);
    // the smaller tail allowance reaches a lower floor over the radius sweep
    CHECK(eval_floor(1e-7, 30) < eval_floor(1e-3, 30));
}

TEST_CASE("ml oracle: exact recovery at high SNR and size constraint at r=0") {
    // P'/P well below 1 keeps codeword truncation negligible. The residual
    // failure mode at finite n is the activity-count estimate; whenever the
    // count is right, the combinatorial least squares is exact at high SNR.
    FiniteBoundConfig fbc;
    fbc.cfg = SystemConfig::dimensioned(256, 6, 1, 0.5, 22.0);
    fbc.activity = ActivityModel::binomial(0.5, 6);
    fbc.kl = 0;
    fbc.ku = 6;
    fbc.rl = fbc.ru = 0;
    fbc.pprime = 0.5 * fbc.P();
    Rng rng(13);
    int count_right = 0;
    for (int trial = 0; trial < 60; ++trial) {
        Rng trng = rng.substream(trial);
        auto inst = sample_tiny_instance(fbc, trng);
        auto dec = ml_oracle_decode(inst, fbc);
        double ynorm2 = inst.y.squaredNorm();
        long long kap = 0;
        double best = -kInf;
        for (long long K = fbc.kl; K <= fbc.ku; ++K) {
            double var = 1.0 + K * fbc.pprime;
            double ll = -0.5 * fbc.cfg.n * std::log(var) - 0.5 * ynorm2 / var;
            if (ll > best) {
                best = ll;
                kap = K;
            }
        }
        long long size = 0;
        for (int w : dec) size += (w >= 0);
        CHECK(size == kap);  // rl = ru = 0 pins the decoded-set size
        if (kap == inst.Ka) {
            ++count_right;
            CHECK(dec == inst.sent);  // unique zero of the LS objective
        }
    }
    CHECK(count_right >= 42);
}

TEST_CASE("theorem-1 bounds dominate the ml oracle empirically") {
    FiniteBoundConfig fbc;
    fbc.cfg = SystemConfig::dimensioned(64, 6, 1, 0.5, 3.0);
    fbc.activity = ActivityModel::binomial(0.5, 6);
    fbc.kl = 0;
    fbc.ku = 6;
    fbc.rl = fbc.ru = 1;
    fbc.pprime = 0.8 * fbc.P();
    auto bound = compute_bound_triple(fbc);

    Rng rng(17);
    const int T = 2000;
    double md = 0, fa = 0, aue = 0;
    for (int trial = 0; trial < T; ++trial) {
        Rng trng = rng.substream(trial);
        auto inst = sample_tiny_instance(fbc, trng);
        auto dec = ml_oracle_decode(inst, fbc);
        long long ka = inst.Ka, ka_hat = 0, nmd = 0, nfa = 0, naue = 0;
        for (std::size_t l = 0; l < dec.size(); ++l) {
            bool act = inst.sent[l] >= 0, d = dec[l] >= 0;
            ka_hat += d;
            if (act && !d) ++nmd;
            if (!act && d) ++nfa;
            if (act && d && dec[l] != inst.sent[l]) ++naue;
        }
        if (ka > 0) {
            md += static_cast<double>(nmd) / ka;
            aue += static_cast<double>(naue) / ka;
        }
        if (ka_hat > 0) fa += static_cast<double>(nfa) / ka_hat;
    }
    md /= T;
    fa /= T;
    aue /= T;
    auto se = [&](double p) { return std::sqrt(std::max(p * (1 - p), 1e-9) / T); };
    CHECK(md <= bound.md + 3.0 * se(md));
    CHECK(fa <= bound.fa + 3.0 * se(fa));
    CHECK(aue <= bound.aue + 3.0 * se(aue));
}

TEST_CASE("golden-section P' optimization improves on a fixed fraction") {
    auto fbc = small_config(500, 20, 2, 0.5, 8.0, 1e-5, 1, 1);
    double fixed = compute_bound_triple(fbc).combined();
    FiniteBoundConfig opt = fbc;
    auto best = optimize_pprime(opt);
    CHECK(best.combined() <= fixed + 1e-9);
    CHECK(opt.pprime > 0.0);
    CHECK(opt.pprime < opt.P());
}
