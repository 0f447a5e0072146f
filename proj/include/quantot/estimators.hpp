#pragma once

// W2 estimators built on sample access: the plug-in estimator, the
// oversample-and-quantize estimator, and the precision-driven pipeline that
// quantizes two fixed clouds before an approximate solve.

#include "quantot/core.hpp"
#include "quantot/quantize.hpp"
#include "quantot/rng.hpp"
#include "quantot/sinkhorn.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace quantot {

// draw(count, rng) returns a count x dim matrix of i.i.d. points. Equal seeds
// give equal draws; the sampler itself holds no mutable state.
struct Sampler {
    std::size_t dim = 0;
    std::string descriptor;
    std::function<Matrix(std::size_t, Rng&)> draw;

    Matrix sample(std::size_t count, Rng& rng) const;
};

struct SamplerPair {
    Sampler mu;
    Sampler nu;
    std::optional<double> reference; // closed-form W2(mu, nu) when known
    std::string descriptor;
};

// n = max(k, ceil(kappa * k^2 * ln k))
std::size_t oversample_budget(std::size_t k, double kappa);

// W2 between uniform empirical measures of k fresh points per side (X drawn
// before Y from the same generator).
double plugin_estimate(const Sampler& mu, const Sampler& nu, std::size_t k, Rng& rng);

enum class Seeding { kmeanspp, afkmc2 };

const char* seeding_name(Seeding s);
Seeding parse_seeding(const std::string& name);

struct QuantizedOptions {
    double kappa = 1.0;
    Seeding seeding = Seeding::kmeanspp;
    std::size_t chain_length = kDefaultChainLength;
    std::size_t lloyd_iters = 0;
};

struct QuantizedEstimate {
    double estimate = 0.0;
    std::size_t n = 0;    // points drawn per side
    std::size_t k_mu = 0; // centers actually used (may fall below k on repeated atoms)
    std::size_t k_nu = 0;
    double phi_mu = 0.0; // quantization error of each side, uniform weights 1/n
    double phi_nu = 0.0;
};

// Draw n = oversample_budget(k, kappa) points per side, seed k centers on each,
// optionally run Lloyd, push forward and return W2 of the two k-point measures.
// When n == k no quantization happens and the result is plugin_estimate.
QuantizedEstimate quantized_estimate_detail(const Sampler& mu, const Sampler& nu, std::size_t k,
                                            const QuantizedOptions& options, Rng& rng);
double quantized_estimate(const Sampler& mu, const Sampler& nu, std::size_t k, const QuantizedOptions& options,
                          Rng& rng);

// Cost-scale precision delta such that any feasible cost within delta of the
// optimum has a square root within eps of the exact distance, given a lower
// bound `gap` on that distance: eps^2 if gap <= eps, else eps (2 gap - eps).
double cost_precision_for_distance(double eps, double gap);

struct EpsEstimate {
    double estimate = 0.0; // sqrt of the approximate cost
    std::size_t k_mu = 0;
    std::size_t k_nu = 0;
    double qerr_mu = 0.0; // each <= eps^2
    double qerr_nu = 0.0;
    double cost_precision = 0.0;
    ApproxSolveReport solve;
};

// Quantize each cloud to precision eps (W2 to its pushforward <= eps), then
// approx-solve between the pushforwards with cost precision chosen so the
// solver adds at most eps on the distance scale. |estimate - W2| <= 3 eps.
EpsEstimate quantized_eps_estimate(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps, Rng& rng,
                                   std::size_t max_iter = kDefaultSinkhornIterations);

// approx_solve on the raw clouds with distance-scale precision eps.
EpsEstimate approx_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps,
                            std::size_t max_iter = kDefaultSinkhornIterations);

struct EstimateRecord {
    std::string estimator;
    std::size_t k = 0;
    double eps = 0.0;
    std::size_t n = 0;
    double kappa = 0.0;
    double estimate = 0.0;
    double wall_time = 0.0; // seconds
    std::uint64_t seed = 0;
};

} // namespace quantot
