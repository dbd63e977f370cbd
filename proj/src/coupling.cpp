#include "maclab/coupling.hpp"

#include <cmath>

#include "maclab/common.hpp"

namespace maclab {

CouplingSpec CouplingSpec::omega_lambda(int omega, int lambda) {
    if (omega < 1) throw std::invalid_argument("CouplingSpec: omega must be >= 1");
    int min_lambda = std::max(2 * omega - 1, 1);
    if (lambda < min_lambda)
        throw std::invalid_argument("CouplingSpec: lambda must be >= max(2*omega-1, 1)");
    int R = lambda + omega - 1;
    int C = lambda;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(R, C);
    for (int c = 0; c < C; ++c)
        for (int r = c; r < c + omega; ++r) W(r, c) = 1.0 / omega;
    CouplingSpec spec;
    spec.omega = omega;
    spec.lambda = lambda;
    spec.W = std::move(W);
    return spec;
}

CouplingSpec CouplingSpec::generic(Eigen::MatrixXd W) {
    if (W.rows() < 1 || W.cols() < 1) throw std::invalid_argument("CouplingSpec: empty matrix");
    if ((W.array() < 0.0).any()) throw std::invalid_argument("CouplingSpec: negative entry");
    for (int c = 0; c < W.cols(); ++c) {
        if (std::fabs(W.col(c).sum() - 1.0) > 1e-12)
            throw std::invalid_argument("CouplingSpec: column sums must be 1");
    }
    CouplingSpec spec;
    spec.W = std::move(W);
    return spec;
}

CouplingSpec make_base_matrix(int omega, int lambda) {
    return CouplingSpec::omega_lambda(omega, lambda);
}

CouplingSpec CouplingSpec::from_json(const nlohmann::json& j) {
    if (j.contains("omega") && j.contains("lambda")) {
        for (auto& [key, _] : j.items())
            if (key != "omega" && key != "lambda")
                throw std::invalid_argument("CouplingSpec: unknown key '" + key + "'");
        return omega_lambda(j.at("omega").get<int>(), j.at("lambda").get<int>());
    }
    if (j.contains("entries")) {
        for (auto& [key, _] : j.items())
            if (key != "entries" && key != "R" && key != "C")
                throw std::invalid_argument("CouplingSpec: unknown key '" + key + "'");
        int R = j.at("R").get<int>();
        int C = j.at("C").get<int>();
        auto entries = j.at("entries").get<std::vector<double>>();
        if (static_cast<int>(entries.size()) != R * C)
            throw std::invalid_argument("CouplingSpec: entries size != R*C");
        Eigen::MatrixXd W(R, C);
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) W(r, c) = entries[r * C + c];
        return generic(std::move(W));
    }
    throw std::invalid_argument("CouplingSpec: need {omega, lambda} or {entries, R, C}");
}

nlohmann::json CouplingSpec::to_json() const {
    if (omega > 0) return {{"omega", omega}, {"lambda", lambda}};
    std::vector<double> entries;
    entries.reserve(W.size());
    for (int r = 0; r < R(); ++r)
        for (int c = 0; c < C(); ++c) entries.push_back(W(r, c));
    return {{"entries", entries}, {"R", R()}, {"C", C()}};
}

Eigen::MatrixXd sample_sc_matrix(const CouplingSpec& spec, int rows, int cols, Rng& rng,
                                 int threads) {
    BlockIndexMaps maps(rows, cols, spec);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
    const double rn = static_cast<double>(rows) / spec.R();

    // Substreams are keyed by (row block, fixed-size row chunk) so the result
    // is identical for any thread count.
    const int chunk = 128;
    struct Task { int r, i0, i1; std::uint64_t key; };
    std::vector<Task> tasks;
    for (int r = 0; r < spec.R(); ++r) {
        auto [lo, hi] = maps.row_range(r);
        for (int i0 = lo; i0 < hi; i0 += chunk) {
            int i1 = std::min(i0 + chunk, hi);
            tasks.push_back({r, i0, i1,
                             (static_cast<std::uint64_t>(r) << 32) |
                                 static_cast<std::uint64_t>((i0 - lo) / chunk)});
        }
    }
    parallel_for(tasks.size(), threads, [&](std::size_t ti) {
        const Task& t = tasks[ti];
        Rng local = rng.substream(t.key);
        for (int c = 0; c < spec.C(); ++c) {
            if (spec.is_zero(t.r, c)) continue;
            double sd = std::sqrt(spec.W(t.r, c) / rn);
            auto [j0, j1] = maps.col_range(c);
            for (int j = j0; j < j1; ++j)
                for (int i = t.i0; i < t.i1; ++i) A(i, j) = sd * local.normal();
        }
    });
    return A;
}

}  // namespace maclab
