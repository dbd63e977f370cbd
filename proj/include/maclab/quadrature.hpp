#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "maclab/special.hpp"

namespace maclab {

// Gauss-Hermite rule set up for expectations over N(0,1):
//   E[g(z)] ~= sum_i w[i] * g(x[i]),  exact for polynomials of degree < 2n.
class GaussHermite {
public:
    explicit GaussHermite(int n) {
        if (n < 1) throw std::invalid_argument("GaussHermite: n < 1");
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            double b = std::sqrt(i / 2.0);
            J(i, i - 1) = b;
            J(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        x_.resize(n);
        w_.resize(n);
        for (int i = 0; i < n; ++i) {
            x_[i] = es.eigenvalues()(i) * std::sqrt(2.0);
            double v = es.eigenvectors()(0, i);
            w_[i] = v * v;
        }
    }

    const std::vector<double>& nodes() const { return x_; }
    const std::vector<double>& weights() const { return w_; }

    template <class F>
    double expect(F&& g) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < x_.size(); ++i) acc += w_[i] * g(x_[i]);
        return acc;
    }

private:
    std::vector<double> x_, w_;
};

// Rules are cached per order; construction involves an eigendecomposition.
inline const GaussHermite& cached_gauss_hermite(int n) {
    static thread_local std::map<int, GaussHermite> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, GaussHermite(n)).first;
    return it->second;
}

// E_{z~N(0,1)}[g(z)] at a fixed order.
template <class F>
double gauss_hermite_expectation(F&& g, int nodes) {
    return cached_gauss_hermite(nodes).expect(g);
}

// Doubles the order until two consecutive rules agree to 1e-8 relative.
template <class F>
double gauss_hermite_expectation_adaptive(F&& g, int start = 100, int max_nodes = 800) {
    double prev = gauss_hermite_expectation(g, start);
    for (int n = 2 * start; n <= max_nodes; n *= 2) {
        double cur = gauss_hermite_expectation(g, n);
        double scale = std::max({std::fabs(prev), std::fabs(cur), 1e-300});
        if (std::fabs(cur - prev) <= 1e-8 * scale) return cur;
        prev = cur;
    }
    return prev;
}

namespace detail {

struct GaussLegendre {
    std::vector<double> x, w;  // on [-1, 1]
    explicit GaussLegendre(int n) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            double b = i / std::sqrt(4.0 * i * i - 1.0);
            J(i, i - 1) = b;
            J(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        x.resize(n);
        w.resize(n);
        for (int i = 0; i < n; ++i) {
            x[i] = es.eigenvalues()(i);
            double v = es.eigenvectors()(0, i);
            w[i] = 2.0 * v * v;
        }
    }
};

}  // namespace detail

// int_a^b g(z) phi(z) dz by composite Gauss-Legendre. Suited to integrands
// that are smooth on [a, b] but kinked elsewhere.
template <class F>
double integrate_against_normal(F&& g, double a, double b, int segments = 24,
                                int nodes_per_seg = 16) {
    if (!(a < b)) return 0.0;
    static thread_local int cached_n = 0;
    static thread_local detail::GaussLegendre* gl = nullptr;
    if (cached_n != nodes_per_seg) {
        delete gl;
        gl = new detail::GaussLegendre(nodes_per_seg);
        cached_n = nodes_per_seg;
    }
    double acc = 0.0;
    double h = (b - a) / segments;
    for (int s = 0; s < segments; ++s) {
        double lo = a + s * h;
        double mid = lo + 0.5 * h;
        double half = 0.5 * h;
        for (int i = 0; i < nodes_per_seg; ++i) {
            double z = mid + half * gl->x[i];
            acc += half * gl->w[i] * g(z) * std_normal_pdf(z);
        }
    }
    return acc;
}

}  // namespace maclab
