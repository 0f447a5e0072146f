#pragma once

// Entropy-regularised transport (log-domain Sinkhorn), the rounding step that
// turns its output into an exactly feasible plan, and the approximate solver
// built from the two.

#include "quantot/core.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace quantot {

inline constexpr std::size_t kDefaultSinkhornIterations = 10000;
inline constexpr double kMinEta = 1e-9;

struct SinkhornOptions {
    double eta = 1.0;
    // Stop once ||P 1 - a||_1 + ||P^T 1 - b||_1 <= stop_tolerance.
    double stop_tolerance = 1e-9;
    std::size_t max_iter = kDefaultSinkhornIterations;
    // When set, receives the dual objective <a,f> + <b,g> - eta * sum(P) after
    // every iteration. Each half-step maximises it exactly, so it never decreases.
    std::vector<double>* dual_trace = nullptr;
};

struct ScaledCoupling {
    Matrix coupling; // P_ij = exp((f_i + g_j - C_ij) / eta); columns match b exactly
    std::vector<double> f;
    std::vector<double> g;
    std::size_t iterations = 0;
    bool converged = false;
    double marginal_violation = 0.0;
};

// Alternating row/column scaling of exp(-C/eta) carried out on the potentials.
// Weights must be strictly positive. Hitting max_iter is not an error: the
// last iterate comes back with converged = false.
ScaledCoupling sinkhorn_scale(std::span<const double> a, std::span<const double> b, const CostMatrix& cost,
                              const SinkhornOptions& options);

// Scale rows down to a, then columns down to b, then add the rank-one residual
// (a - r)(b - c)^T / ||a - r||_1. The result has marginals a and b and lies
// within 2 (||F 1 - a||_1 + ||F^T 1 - b||_1) of F in l1.
Matrix round_to_feasible(const Matrix& coupling, std::span<const double> a, std::span<const double> b);

struct ApproxSolveReport {
    double cost = 0.0; // <C, rounded plan>
    std::size_t iterations = 0;
    double epsilon = 0.0; // requested precision on the cost scale
    double eta = 0.0;
    double stop_tolerance = 0.0;
    double marginal_violation = 0.0; // before rounding
    bool converged = false;
    Matrix plan; // rounded plan over the full (unpruned) marginals
};

// <C, pi> within eps of the exact optimum: eta = eps / (4 ln max(n1, n2)),
// stop at violation eps / (8 max C), then round. Zero-weight atoms are removed
// before scaling and get zero rows/columns in the plan.
ApproxSolveReport approx_solve(std::span<const double> a, std::span<const double> b, const CostMatrix& cost,
                               double eps, std::size_t max_iter = kDefaultSinkhornIterations);

} // namespace quantot
