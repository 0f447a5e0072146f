#pragma once

// Data-parallel inner loops shared by the quantizers, the cost builder, the
// network simplex pricing step and the log-domain Sinkhorn iteration.
//
// Every kernel has a scalar reference implementation. Vector variants (AVX2 on
// x86-64, NEON on AArch64) are selected at runtime and are tested against the
// scalar reference: the distance and pricing kernels are bitwise identical,
// the exponential kernels agree to a few ulps.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace quantot::kernels {

enum class Isa { scalar, avx2, neon };

struct ReducedCostMin {
    double value;
    std::size_t index;
};

struct KernelSet {
    Isa isa;
    const char* name;

    // out[j] = sum_t (x[t] - Y[j*d + t])^2 for the m rows of Y.
    void (*sq_dist_batch)(const double* x, const double* Y, std::size_t m, std::size_t d, double* out);

    // For each of the n rows of X: when ||X_i - c||^2 < dist[i], store the new
    // distance and set label[i] = center. Strict comparison keeps the earlier
    // (lower-index) center on ties.
    void (*min_update)(const double* X, std::size_t n, std::size_t d, const double* c,
                       std::uint32_t center, double* dist, std::uint32_t* label);

    // log sum_j exp((pot[j] - cost[j]) * inv_eta), max-shifted.
    double (*log_sum_exp)(const double* cost, const double* pot, double inv_eta, std::size_t m);

    // out[j] = exp((shift + pot[j] - cost[j]) * inv_eta); returns the row sum.
    double (*gibbs_row)(const double* cost, const double* pot, double shift, double inv_eta,
                        std::size_t m, double* out);

    // min_j state[j] * (cost[j] + pi_src - pi_tgt[j]) with the first index on ties.
    // Returns {+inf, 0} when m == 0.
    ReducedCostMin (*min_reduced_cost)(const double* cost, const std::int8_t* state, double pi_src,
                                       const double* pi_tgt, std::size_t m);
};

const KernelSet& scalar();

// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelSet* avx2();
const KernelSet* neon();

std::vector<const KernelSet*> available();

// The set used by the library. Defaults to the widest supported ISA; the
// QUANTOT_ISA environment variable (scalar|avx2|neon) overrides it.
const KernelSet& active();

// Throws InputError when the requested ISA is unavailable.
void select(Isa isa);
Isa parse_isa(std::string_view name);

} // namespace quantot::kernels
