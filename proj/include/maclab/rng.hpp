#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace maclab {

// Counter-based generator (Philox4x32-10). A stream is identified by
// (seed, stream id); output depends only on that pair and the counter, so
// substreams handed to parallel workers reproduce bitwise regardless of
// scheduling.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          stream_(stream) {}

    // Derives an independent stream keyed by (parent stream, id).
    Rng substream(std::uint64_t id) const {
        Rng r(*this);
        r.stream_ = mix64(stream_ ^ mix64(id + 0x9e3779b97f4a7c15ULL));
        r.ctr_ = 0;
        r.have_ = 0;
        r.has_spare_ = false;
        return r;
    }

    std::uint64_t seed() const {
        return (static_cast<std::uint64_t>(key1_) << 32) | key0_;
    }

    std::uint32_t next_u32() {
        if (have_ == 0) refill();
        return buf_[--have_];
    }

    std::uint64_t operator()() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~0ULL; }

    // Uniform on (0,1); never returns an exact endpoint.
    double uniform() {
        return (next_u32() + 0.5) * 0x1p-32;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void normal_fill(std::span<double> out) {
        for (double& v : out) v = normal();
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // 64-bit multiply-shift; bias < 2^-64, irrelevant at our sample sizes
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static std::uint64_t mix64(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    void refill() {
        std::uint32_t c0 = static_cast<std::uint32_t>(ctr_);
        std::uint32_t c1 = static_cast<std::uint32_t>(ctr_ >> 32);
        std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
        std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = 0xD2511F53ULL * c0;
            std::uint64_t p1 = 0xCD9E8D57ULL * c2;
            std::uint32_t h0 = static_cast<std::uint32_t>(p0 >> 32);
            std::uint32_t l0 = static_cast<std::uint32_t>(p0);
            std::uint32_t h1 = static_cast<std::uint32_t>(p1 >> 32);
            std::uint32_t l1 = static_cast<std::uint32_t>(p1);
            std::uint32_t n0 = h1 ^ c1 ^ k0;
            std::uint32_t n1 = l1;
            std::uint32_t n2 = h0 ^ c3 ^ k1;
            std::uint32_t n3 = l0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9U;
            k1 += 0xBB67AE85U;
        }
        buf_[0] = c0; buf_[1] = c1; buf_[2] = c2; buf_[3] = c3;
        have_ = 4;
        ++ctr_;
    }

    std::uint32_t key0_, key1_;
    std::uint64_t stream_ = 0;
    std::uint64_t ctr_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int have_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace maclab
