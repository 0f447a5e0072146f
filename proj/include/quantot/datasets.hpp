#pragma once

// Synthetic sampler pairs with known W2, frozen mixture clouds, and loaders
// for CSV point clouds and plain PGM images.

#include "quantot/core.hpp"
#include "quantot/estimators.hpp"
#include "quantot/rng.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace quantot {

// N(mean, tau I)
Sampler gaussian_sampler(std::vector<double> mean, double tau);

// N(0, tau I_d) vs N(1_d, tau I_d); reference sqrt(d).
SamplerPair gaussian_pair(std::size_t d, double tau);

// Point masses at 0 and 1_d; reference sqrt(d).
SamplerPair dirac_pair(std::size_t d);

// mu: uniform on [-0.5, 0.5]^2 x [0, 1]^(d-2). nu: mu pushed through
// T(x) = x + 2 sign(x) on the first two coordinates. Reference sqrt(8).
SamplerPair fragmented_hypercube(std::size_t d);
Matrix hypercube_map(const Matrix& points);

// i.i.d. atoms of a fixed discrete measure, drawn by weight.
Sampler empirical_sampler(const DiscreteMeasure& measure, std::string descriptor);

// Two frozen uniform clouds of n_tot points, each from its own m-component
// Gaussian mixture (equal component weights, means uniform in [0,1]^d,
// covariance tau I).
std::pair<DiscreteMeasure, DiscreteMeasure> sampled_mixtures(std::size_t m, std::size_t d, double tau,
                                                             std::size_t n_tot, Rng& rng);

// Uniform measure on the side x side grid of cell centers in [0,1]^2.
DiscreteMeasure uniform_grid(std::size_t side);

struct CsvOptions {
    bool standardize = false;
    // Column holding the weights: a header name, or a 0-based index.
    std::optional<std::string> weight_column;
};

// Comma-separated numbers, one point per line. A first line with any
// non-numeric field is a header. Weights are uniform unless a weight column is
// named; that column must already sum to 1. Standardisation centres each column
// and divides by its population standard deviation; a constant column is only
// centred and a warning is appended to `warnings` (or printed to stderr).
DiscreteMeasure load_csv_pointcloud(const std::string& path, const CsvOptions& options = {},
                                    std::vector<std::string>* warnings = nullptr);

// Plain-text "P2" PGM. Pixel (row r, column c) of a W x H image sits at
// ((c + 0.5) / W, (r + 0.5) / H); weights are intensities normalised to 1 and
// black pixels are dropped.
DiscreteMeasure load_grid_image(const std::string& path);

} // namespace quantot
