#pragma once

// Random instance generators shared by the unit tests and the acceptance run.

#include "vvord/grid.hpp"
#include "vvord/random.hpp"
#include "vvord/rules.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace vvord::testing {

inline FeederModel scalar_feeder(double x, double rating = 1.0) {
    FeederModel f;
    f.x = Matrix::Constant(1, 1, x);
    f.r = Matrix::Constant(1, 1, x / 2);
    f.der_nodes = {0};
    f.q_rating = Vector::Constant(1, rating);
    return f;
}

inline FeederModel matrix_feeder(const Matrix& x, PhaseLayout layout = PhaseLayout::single, double rating = 1.0) {
    FeederModel f;
    f.x = x;
    f.r = layout == PhaseLayout::single ? Matrix(0.5 * x) : Matrix(Matrix::Zero(x.rows(), x.cols()));
    f.layout = layout;
    for (int i = 0; i < x.rows(); ++i) f.der_nodes.push_back(i);
    f.q_rating = Vector::Constant(x.rows(), rating);
    return f;
}

/// Random radial feeder on n non-substation nodes: node k hangs off a
/// uniformly chosen earlier node, reactances in [x_lo, x_hi].
inline FeederModel random_radial(Rng& rng, int n, double x_lo = 0.01, double x_hi = 0.05, bool all_ders = true,
                                 double rating = 0.5) {
    std::vector<Branch> branches;
    for (int k = 1; k <= n; ++k) {
        const int parent = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        const double x = rng.uniform(x_lo, x_hi);
        branches.push_back({parent, k, 0.5 * x, x});
    }
    FeederModel f = build_radial_feeder(branches, 1.0);
    std::vector<int> nodes;
    for (int i = 0; i < n; ++i) {
        if (all_ders || i % 2 == 1) nodes.push_back(i);
    }
    return with_ders(f, nodes, Vector::Constant(static_cast<Eigen::Index>(nodes.size()), rating));
}

/// Path feeder 0 -> 1 -> ... -> n with equal reactances; ill-conditioned
/// for long paths (kappa grows like n^2).
inline FeederModel path_feeder(int n, double x, double rating = 0.5) {
    std::vector<Branch> branches;
    for (int k = 1; k <= n; ++k) branches.push_back({k - 1, k, 0.5 * x, x});
    FeederModel f = build_radial_feeder(branches, 1.0);
    std::vector<int> nodes(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) nodes[static_cast<std::size_t>(i)] = i;
    return with_ders(f, nodes, Vector::Constant(n, rating));
}

inline Scenario random_scenario(Rng& rng, int n, double spread = 0.08) {
    Scenario s;
    s.v_tilde.resize(n);
    for (int i = 0; i < n; ++i) s.v_tilde(i) = 1.0 + rng.uniform(-spread, spread);
    return s;
}

/// Random transformed rules on the DER nodes, strictly inside the box.
inline TransformedParams random_transformed(Rng& rng, const FeederModel& f, double alpha_lo = 0.2,
                                            double alpha_hi = 0.9) {
    TransformedParams zt = TransformedParams::uncontrolled(f.n_nodes());
    for (std::size_t k = 0; k < f.der_nodes.size(); ++k) {
        const int i = f.der_nodes[k];
        zt.set_node(i, {rng.uniform(0.97, 1.03), rng.uniform(0.0, 0.02), rng.uniform(alpha_lo, alpha_hi),
                        rng.uniform(0.1, 1.0) * f.q_rating(static_cast<Eigen::Index>(k))});
    }
    return zt;
}

/// Random matrix with entries uniform in [-1, 1].
inline Matrix random_matrix(Rng& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
    }
    return m;
}

/// Asymmetric X with entries of both signs whose symmetric part is positive
/// definite. Draws are repeated until both signs occur.
inline Matrix random_multiphase_x(Rng& rng, int n) {
    for (;;) {
        const Matrix a = random_matrix(rng, n, n);
        const Matrix k = random_matrix(rng, n, n);
        Matrix x = 0.1 * (a * a.transpose() / n + 0.5 * Matrix::Identity(n, n)) + 0.05 * (k - k.transpose());
        if (x.minCoeff() < 0.0 && x.maxCoeff() > 0.0) return x;
    }
}

/// Minimizes 1/2 q^2/alpha + delta |q| + (1/2 mu)(q - w)^2 over |q| <= q_max
/// by grid search with successive refinement around the best grid point.
inline double brute_force_scalar_min(double alpha, double delta, double mu, double w, double q_max,
                                     int points = 2001, int rounds = 12) {
    auto h = [&](double q) { return 0.5 * q * q / alpha + delta * std::abs(q) + (q - w) * (q - w) / (2 * mu); };
    double lo = -q_max, hi = q_max, best = 0.0;
    for (int round = 0; round < rounds; ++round) {
        const double step = (hi - lo) / (points - 1);
        double best_val = h(lo);
        best = lo;
        for (int k = 1; k < points; ++k) {
            const double q = lo + k * step;
            const double val = h(q);
            if (val < best_val) {
                best_val = val;
                best = q;
            }
        }
        lo = std::max(-q_max, best - 2 * step);
        hi = std::min(q_max, best + 2 * step);
    }
    return best;
}

}  // namespace vvord::testing
