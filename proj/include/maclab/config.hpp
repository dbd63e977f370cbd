#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "maclab/special.hpp"

namespace maclab {

// Global problem parameters. Noise convention: sigma2 = N0/2, and Eb/N0 in dB
// converts as Eb = 10^(dB/10) * N0.
struct SystemConfig {
    long long n = 0;      // channel uses (0 when only asymptotic quantities matter)
    long long L = 0;      // total users
    int k = 1;            // payload bits per user
    double mu = 0.0;      // user density L/n
    double alpha = 1.0;   // activity probability
    double Eb = 1.0;      // energy per bit
    double sigma2 = 1.0;  // noise variance N0/2

    double M() const { return std::exp2(static_cast<double>(k)); }
    // Codebook size as an integer; only valid for simulation-scale k.
    long long M_int() const {
        if (k > 20) throw std::invalid_argument("SystemConfig: M too large to enumerate");
        return 1LL << k;
    }
    double mu_a() const { return alpha * mu; }
    double E() const { return Eb * k; }
    double P() const { return n > 0 ? Eb * k / static_cast<double>(n) : 0.0; }
    double N0() const { return 2.0 * sigma2; }
    double ebn0_db() const { return linear_to_db(Eb / N0()); }

    static SystemConfig dimensioned(long long n, long long L, int k, double alpha,
                                    double ebn0_db, double sigma2 = 1.0) {
        SystemConfig c;
        c.n = n;
        c.L = L;
        c.k = k;
        c.alpha = alpha;
        c.sigma2 = sigma2;
        c.Eb = db_to_linear(ebn0_db) * 2.0 * sigma2;
        c.mu = static_cast<double>(L) / static_cast<double>(n);
        c.validate();
        return c;
    }

    static SystemConfig asymptotic(double mu, int k, double alpha, double ebn0_db,
                                   double sigma2 = 1.0) {
        SystemConfig c;
        c.k = k;
        c.alpha = alpha;
        c.sigma2 = sigma2;
        c.Eb = db_to_linear(ebn0_db) * 2.0 * sigma2;
        c.mu = mu;
        c.validate();
        return c;
    }

    SystemConfig with_ebn0_db(double db) const {
        SystemConfig c = *this;
        c.Eb = db_to_linear(db) * N0();
        return c;
    }

    void validate() const {
        if (k < 0) throw std::invalid_argument("SystemConfig: k < 0");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("SystemConfig: alpha not in [0,1]");
        if (!(sigma2 > 0.0)) throw std::invalid_argument("SystemConfig: sigma2 <= 0");
        if (!(Eb > 0.0)) throw std::invalid_argument("SystemConfig: Eb <= 0");
        if (!(mu >= 0.0)) throw std::invalid_argument("SystemConfig: mu < 0");
    }
};

struct ErrorTriple {
    double p_md = 0.0;
    double p_fa = 0.0;
    double p_aue = 0.0;

    double combined() const { return std::max(p_md, p_fa) + p_aue; }

    ErrorTriple clipped() const {
        auto c = [](double v) { return std::min(1.0, std::max(0.0, v)); };
        return {c(p_md), c(p_fa), c(p_aue)};
    }
};

// Distribution of the number of active users Ka on [0 : L].
class ActivityModel {
public:
    static ActivityModel binomial(double alpha, long long L) {
        ActivityModel m;
        m.L_ = L;
        m.pmf_.resize(L + 1);
        double la = std::log(alpha), l1a = std::log1p(-alpha);
        for (long long j = 0; j <= L; ++j) {
            double lp;
            if (alpha == 0.0) lp = (j == 0) ? 0.0 : -kInf;
            else if (alpha == 1.0) lp = (j == L) ? 0.0 : -kInf;
            else lp = lchoose(static_cast<double>(L), static_cast<double>(j)) + j * la + (L - j) * l1a;
            m.pmf_[j] = std::exp(lp);
        }
        m.mean_ = alpha * L;
        m.var_ = alpha * (1.0 - alpha) * L;
        return m;
    }

    static ActivityModel explicit_pmf(std::vector<double> pmf) {
        ActivityModel m;
        m.L_ = static_cast<long long>(pmf.size()) - 1;
        if (m.L_ < 0) throw std::invalid_argument("ActivityModel: empty pmf");
        double s = 0.0;
        for (double p : pmf) {
            if (p < 0.0) throw std::invalid_argument("ActivityModel: negative pmf");
            s += p;
        }
        if (std::fabs(s - 1.0) > 1e-12) throw std::invalid_argument("ActivityModel: pmf must sum to 1");
        m.pmf_ = std::move(pmf);
        m.mean_ = 0.0;
        for (long long j = 0; j <= m.L_; ++j) m.mean_ += j * m.pmf_[j];
        m.var_ = 0.0;
        for (long long j = 0; j <= m.L_; ++j) m.var_ += (j - m.mean_) * (j - m.mean_) * m.pmf_[j];
        return m;
    }

    long long L() const { return L_; }
    double pmf(long long j) const { return (j < 0 || j > L_) ? 0.0 : pmf_[j]; }
    double mean() const { return mean_; }
    double stddev() const { return std::sqrt(var_); }

    double tail_outside(long long kl, long long ku) const {
        double t = 0.0;
        for (long long j = 0; j < kl; ++j) t += pmf_[j];
        for (long long j = ku + 1; j <= L_; ++j) t += pmf_[j];
        return t;
    }

    // Largest kl / smallest ku with at most pbar/2 mass in each tail.
    std::pair<long long, long long> choose_range(double pbar) const {
        double half = pbar / 2.0;
        long long kl = 0;
        double acc = 0.0;
        for (long long j = 0; j <= L_; ++j) {
            if (acc + pmf_[j] > half) { kl = j; break; }
            acc += pmf_[j];
            kl = j + 1;
        }
        long long ku = L_;
        acc = 0.0;
        for (long long j = L_; j >= 0; --j) {
            if (acc + pmf_[j] > half) { ku = j; break; }
            acc += pmf_[j];
            ku = j - 1;
        }
        if (kl > ku) throw std::invalid_argument("ActivityModel: pbar too large for any range");
        return {kl, ku};
    }

private:
    long long L_ = 0;
    std::vector<double> pmf_;
    double mean_ = 0.0, var_ = 0.0;
};

}  // namespace maclab
