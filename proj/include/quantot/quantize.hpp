#pragma once

// Quantizers: k-means++ (D^2) seeding, AFK-MC^2 seeding, Lloyd refinement and
// precision-targeted greedy quantization, plus the quantization-error
// functional and exact optimum oracles for small instances.

#include "quantot/core.hpp"
#include "quantot/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace quantot {

struct QuantizationResult {
    Matrix centers;
    std::vector<std::uint32_t> assignments;
    std::vector<double> aggregated_weights;
    // sum_i w_i d(x_i, centers)^2 (or ^p for the precision quantizer with exponent p)
    double error = 0.0;

    std::size_t size() const noexcept { return centers.rows(); }

    // The weighted center measure, zero-mass centers dropped.
    DiscreteMeasure measure() const;
};

/// Weighted k-means++: the first center is drawn proportionally to w_i, each
/// following one proportionally to w_i * d(x_i, centers)^2. If that mass
/// vanishes before k centers exist, the remaining centers are drawn uniformly
/// among support points not yet covered; when none remain, fewer than k
/// centers are returned.
QuantizationResult kmeanspp_seed(const DiscreteMeasure& measure, std::size_t k, Rng& rng);

inline constexpr std::size_t kDefaultChainLength = 200;

/// AFK-MC^2: each center after the first is the end state of a
/// Metropolis-Hastings chain of `chain_length` steps that targets the D^2
/// distribution, with the mixed proposal q(x) = w_x/2 + w_x d(x,c_1)^2 / (2 phi).
QuantizationResult afk_mc2_seed(const DiscreteMeasure& measure, std::size_t k, std::size_t chain_length, Rng& rng);

// Weighted Lloyd iterations until assignments stop changing or max_iter is hit.
// The error never increases; max_iter == 0 returns the input unchanged.
QuantizationResult lloyd_refine(const DiscreteMeasure& measure, QuantizationResult result, std::size_t max_iter);

/// sum_i w_i d(x_i, S)^2. Under uniform weights this is phi_S / n.
double quantization_error(const DiscreteMeasure& measure, const Matrix& centers);

/// Greedy farthest-point quantization: start from a weight-proportional random
/// atom and add the atom with the largest w_i d(x_i, S)^p until
/// sum_i w_i d(x_i, S)^p <= eps^p.
QuantizationResult quantize_to_precision(const DiscreteMeasure& measure, double eps, Rng& rng,
                                         double exponent = 2.0);

// Exact optimal quantization error for small instances (test oracles).
//
// optimal_quantization_1d: d == 1, dynamic programming over contiguous
//   intervals of the sorted atoms with centroid centers (exact continuous optimum).
// optimal_quantization_partitions: every assignment of atoms to k labels with
//   centroid centers (exact continuous optimum); requires k^n <= 2e7.
// optimal_quantization_subsets: best k-subset of the support as centers;
//   requires n <= 15. Upper bound on the continuous optimum.
// optimal_quantization_bruteforce picks the exact route when one applies and
//   falls back to subsets otherwise.
double optimal_quantization_1d(const DiscreteMeasure& measure, std::size_t k);
double optimal_quantization_partitions(const DiscreteMeasure& measure, std::size_t k);
double optimal_quantization_subsets(const DiscreteMeasure& measure, std::size_t k);
double optimal_quantization_bruteforce(const DiscreteMeasure& measure, std::size_t k);

} // namespace quantot
