#include "variants.hpp"

#include <cmath>
#include <limits>

namespace quantot::kernels::detail {
namespace {

void sq_dist_batch(const double* x, const double* Y, std::size_t m, std::size_t d, double* out) {
    for (std::size_t j = 0; j < m; ++j) {
        const double* y = Y + j * d;
        double acc = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
            const double diff = x[t] - y[t];
            acc += diff * diff;
        }
        out[j] = acc;
    }
}

void min_update(const double* X, std::size_t n, std::size_t d, const double* c, std::uint32_t center,
                double* dist, std::uint32_t* label) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = X + i * d;
        double acc = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
            const double diff = c[t] - x[t];
            acc += diff * diff;
        }
        if (acc < dist[i]) {
            dist[i] = acc;
            label[i] = center;
        }
    }
}

double log_sum_exp(const double* cost, const double* pot, double inv_eta, std::size_t m) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
        const double s = (pot[j] - cost[j]) * inv_eta;
        if (s > hi) hi = s;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum += std::exp((pot[j] - cost[j]) * inv_eta - hi);
    return hi + std::log(sum);
}

double gibbs_row(const double* cost, const double* pot, double shift, double inv_eta, std::size_t m,
                 double* out) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        out[j] = std::exp((shift + pot[j] - cost[j]) * inv_eta);
        sum += out[j];
    }
    return sum;
}

ReducedCostMin min_reduced_cost(const double* cost, const std::int8_t* state, double pi_src,
                                const double* pi_tgt, std::size_t m) {
    ReducedCostMin best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t j = 0; j < m; ++j) {
        const double rc = static_cast<double>(state[j]) * (cost[j] + pi_src - pi_tgt[j]);
        if (rc < best.value) best = {rc, j};
    }
    return best;
}

} // namespace

const KernelSet scalar_set{
    Isa::scalar, "scalar", sq_dist_batch, min_update, log_sum_exp, gibbs_row, min_reduced_cost,
};

} // namespace quantot::kernels::detail
