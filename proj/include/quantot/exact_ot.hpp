#pragma once

#include "quantot/core.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace quantot {

struct ExactSolution {
    TransportPlan plan;
    double cost = 0.0;
    // Dual certificate: f_i + g_j <= C_ij (up to the pricing tolerance) and
    // sum_i a_i f_i + sum_j b_j g_j == cost at optimality.
    std::vector<double> row_potential;
    std::vector<double> col_potential;
    double dual_value = 0.0;
    std::size_t pivots = 0;
};

// Reduced-cost threshold below which an arc is considered improving.
inline constexpr double kPricingTolerance = 1e-9;

/// Exact discrete optimal transport min <C, pi> over couplings of a and b,
/// solved by a primal network simplex on the complete bipartite graph with
/// block-search pricing and a strongly feasible spanning tree (no cycling
/// on degenerate pivots). Zero weights and duplicate atoms are allowed.
ExactSolution solve_exact(std::span<const double> a, std::span<const double> b, const CostMatrix& cost);

/// 2-Wasserstein distance between two discrete measures.
double w2_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// min over permutations s of (1/n) sum_i ||x_i - y_s(i)||^2, n <= 8.
double brute_force_assignment(const Matrix& X, const Matrix& Y);

} // namespace quantot
