#pragma once

// Discrete measures, cost matrices, transport plans and the nearest-neighbour
// pushforward. All types are immutable after construction.

#include "quantot/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace quantot {

inline constexpr double kWeightSumTolerance = 1e-9;
inline constexpr double kPlanMarginalTolerance = 1e-8;

/// Points in R^d with probability weights. Construction rejects (does not
/// renormalise) weights that are negative or whose sum is off 1 by more than
/// kWeightSumTolerance.
class DiscreteMeasure {
public:
    DiscreteMeasure(Matrix support, std::vector<double> weights);

    static DiscreteMeasure uniform(Matrix support);

    std::size_t size() const noexcept { return support_.rows(); }
    std::size_t dim() const noexcept { return support_.cols(); }
    const Matrix& support() const noexcept { return support_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> point(std::size_t i) const noexcept { return support_.row(i); }

    std::vector<double> mean() const;

private:
    Matrix support_;
    std::vector<double> weights_;
};

class CostMatrix {
public:
    /// Takes ownership of precomputed entries; all must be finite and >= 0.
    explicit CostMatrix(Matrix entries);

    std::size_t rows() const noexcept { return entries_.rows(); }
    std::size_t cols() const noexcept { return entries_.cols(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return entries_(i, j); }
    std::span<const double> row(std::size_t i) const noexcept { return entries_.row(i); }
    const Matrix& entries() const noexcept { return entries_; }
    double max_entry() const noexcept { return max_entry_; }

private:
    Matrix entries_;
    double max_entry_ = 0.0;
};

/// Nonnegative coupling whose row and column sums match the stored marginals
/// within `tolerance` in the infinity norm.
class TransportPlan {
public:
    TransportPlan(Matrix matrix, std::vector<double> row_marginal, std::vector<double> col_marginal,
                  double tolerance = kPlanMarginalTolerance);

    const Matrix& matrix() const noexcept { return matrix_; }
    std::span<const double> row_marginal() const noexcept { return row_marginal_; }
    std::span<const double> col_marginal() const noexcept { return col_marginal_; }
    std::size_t rows() const noexcept { return matrix_.rows(); }
    std::size_t cols() const noexcept { return matrix_.cols(); }

private:
    Matrix matrix_;
    std::vector<double> row_marginal_;
    std::vector<double> col_marginal_;
};

// C_ij = ||x_i - y_j||^exponent. The squared Euclidean case (exponent 2) is the
// only one the estimators and benchmarks use.
CostMatrix pairwise_cost(const Matrix& X, const Matrix& Y, double exponent = 2.0);
CostMatrix squared_euclidean_cost(const Matrix& X, const Matrix& Y);

struct Assignment {
    std::vector<std::uint32_t> index;
    std::vector<double> sq_distance;
};

/// Nearest center for every point; ties go to the lowest center index.
Assignment nearest_neighbor_assign(const Matrix& points, const Matrix& centers);

// Per-center total of the weights assigned to it (zero-mass centers included).
std::vector<double> aggregate_weights(std::span<const double> weights, std::span<const std::uint32_t> assignment,
                                      std::size_t num_centers);

/// Moves every atom to its nearest center and accumulates weights per Voronoi
/// cell. Centers that receive no mass are dropped.
DiscreteMeasure pushforward(const DiscreteMeasure& measure, const Matrix& centers);
DiscreteMeasure pushforward(const DiscreteMeasure& measure, const Matrix& centers,
                            std::span<const std::uint32_t> assignment);

double transport_cost(const TransportPlan& plan, const CostMatrix& cost);

// Lower bound on W2 between two measures: distance between their means.
double mean_gap(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

} // namespace quantot
