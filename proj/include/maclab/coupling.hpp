#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <utility>

#include "maclab/rng.hpp"

namespace maclab {

// Base matrix for spatially coupled designs. Columns sum to one; the
// (omega, Lambda) family has omega entries of 1/omega on the band diagonal.
struct CouplingSpec {
    int omega = 0, lambda = 0;  // 0 when the matrix is generic
    Eigen::MatrixXd W;

    int R() const { return static_cast<int>(W.rows()); }
    int C() const { return static_cast<int>(W.cols()); }
    double theta() const { return static_cast<double>(R()) / C(); }
    bool is_zero(int r, int c) const { return W(r, c) == 0.0; }

    static CouplingSpec omega_lambda(int omega, int lambda);
    static CouplingSpec generic(Eigen::MatrixXd W);
    static CouplingSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// mu_in = theta * mu = (1 + (omega-1)/Lambda) * mu for the (omega,Lambda) family.
inline double inner_density(const CouplingSpec& spec, double mu) {
    return spec.theta() * mu;
}

// Maps flat row/column indices to their blocks; blocks partition the index sets.
struct BlockIndexMaps {
    int rows = 0, cols = 0, R = 1, C = 1;

    BlockIndexMaps(int rows_, int cols_, const CouplingSpec& spec)
        : rows(rows_), cols(cols_), R(spec.R()), C(spec.C()) {
        if (rows % R != 0) throw std::invalid_argument("BlockIndexMaps: R must divide rows");
        if (cols % C != 0) throw std::invalid_argument("BlockIndexMaps: C must divide cols");
    }

    int rows_per_block() const { return rows / R; }
    int cols_per_block() const { return cols / C; }
    int row_block(int i) const { return i / rows_per_block(); }
    int col_block(int j) const { return j / cols_per_block(); }
    std::pair<int, int> row_range(int r) const {
        return {r * rows_per_block(), (r + 1) * rows_per_block()};
    }
    std::pair<int, int> col_range(int c) const {
        return {c * cols_per_block(), (c + 1) * cols_per_block()};
    }
};

CouplingSpec make_base_matrix(int omega, int lambda);

// Spatially coupled Gaussian matrix: entry (i,j) ~ N(0, W(r(i),c(j)) / (rows/R)),
// exactly zero in zero blocks. Expected squared column norm is 1.
Eigen::MatrixXd sample_sc_matrix(const CouplingSpec& spec, int rows, int cols, Rng& rng,
                                 int threads = 1);

}  // namespace maclab
