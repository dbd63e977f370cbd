#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace maclab {

struct OptResult {
    double x = 0.0;
    double value = 0.0;
};

// Golden-section search for a maximum on [lo, hi]. Exact for unimodal f;
// otherwise returns a local maximizer. Non-finite f values abort.
template <class F>
OptResult golden_section_max(F&& f, double lo, double hi, double tol) {
    if (!(lo < hi)) throw std::invalid_argument("golden_section_max: lo >= hi");
    if (!(tol > 0.0)) throw std::invalid_argument("golden_section_max: tol <= 0");
    const double invphi = 0.6180339887498948482;
    auto eval = [&](double x) {
        double v = f(x);
        if (std::isnan(v)) throw std::runtime_error("golden_section_max: f(x) is NaN");
        return v;
    };
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = eval(x2);
        } else {
            b = x2;
            x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = eval(x1);
        }
    }
    double xm = 0.5 * (a + b);
    double fm = eval(xm);
    if (f1 > fm) { xm = x1; fm = f1; }
    if (f2 > fm) { xm = x2; fm = f2; }
    return {xm, fm};
}

template <class F>
OptResult golden_section_min(F&& f, double lo, double hi, double tol) {
    auto r = golden_section_max([&](double x) { return -f(x); }, lo, hi, tol);
    return {r.x, -r.value};
}

// Coarse scan on a caller-supplied grid followed by golden refinement in the
// bracketing interval. Guards against non-unimodal objectives.
template <class F>
OptResult scan_then_golden_max(F&& f, const std::vector<double>& grid, double tol) {
    if (grid.size() < 2) throw std::invalid_argument("scan_then_golden_max: grid too small");
    std::size_t best = 0;
    double fbest = f(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        double v = f(grid[i]);
        if (v > fbest) { fbest = v; best = i; }
    }
    double lo = grid[best == 0 ? 0 : best - 1];
    double hi = grid[best + 1 < grid.size() ? best + 1 : best];
    if (!(lo < hi)) return {grid[best], fbest};
    auto r = golden_section_max(f, lo, hi, tol);
    if (r.value < fbest) return {grid[best], fbest};
    return r;
}

// Largest x in [lo, hi] with pred(x) true, assuming pred is monotone
// (true below a threshold). Returns lo - 1 style sentinel handling to caller:
// if pred(lo) is false the search reports {found=false}.
struct BisectResult {
    bool found = false;
    double x = 0.0;
};

template <class Pred>
BisectResult bisect_largest_true(Pred&& pred, double lo, double hi, int iters) {
    if (!pred(lo)) return {false, lo};
    if (pred(hi)) return {true, hi};
    double a = lo, b = hi;  // pred(a) true, pred(b) false
    for (int i = 0; i < iters; ++i) {
        double m = 0.5 * (a + b);
        if (pred(m)) a = m; else b = m;
    }
    return {true, a};
}

}  // namespace maclab
