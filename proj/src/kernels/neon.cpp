#include "variants.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

#include <cmath>
#include <limits>

namespace quantot::kernels::detail {
namespace {

inline float64x2_t load_pair(const double* rows, std::size_t t, std::size_t d) {
    float64x2_t v = vdupq_n_f64(0.0);
    v = vld1q_lane_f64(rows + t, v, 0);
    v = vld1q_lane_f64(rows + d + t, v, 1);
    return v;
}

inline float64x2_t sq_dist2(const double* x, const double* rows, std::size_t d) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t t = 0; t < d; ++t) {
        const float64x2_t diff = vsubq_f64(vdupq_n_f64(x[t]), load_pair(rows, t, d));
        acc = vaddq_f64(acc, vmulq_f64(diff, diff));
    }
    return acc;
}

void sq_dist_batch(const double* x, const double* Y, std::size_t m, std::size_t d, double* out) {
    std::size_t j = 0;
    for (; j + 2 <= m; j += 2) vst1q_f64(out + j, sq_dist2(x, Y + j * d, d));
    if (j < m) scalar_set.sq_dist_batch(x, Y + j * d, m - j, d, out + j);
}

void min_update(const double* X, std::size_t n, std::size_t d, const double* c, std::uint32_t center,
                double* dist, std::uint32_t* label) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t acc = sq_dist2(c, X + i * d, d);
        const uint64x2_t lt = vcltq_f64(acc, vld1q_f64(dist + i));
        if (vgetq_lane_u64(lt, 0)) {
            dist[i] = vgetq_lane_f64(acc, 0);
            label[i] = center;
        }
        if (vgetq_lane_u64(lt, 1)) {
            dist[i + 1] = vgetq_lane_f64(acc, 1);
            label[i + 1] = center;
        }
    }
    if (i < n) scalar_set.min_update(X + i * d, n - i, d, c, center, dist + i, label + i);
}

// Same reduction as the AVX2 variant: x = n ln2 + r, degree-12 Taylor for exp(r).
inline float64x2_t exp2v(float64x2_t x) {
    const uint64x2_t tiny = vcltq_f64(x, vdupq_n_f64(kExpArgMin));
    x = vmaxq_f64(x, vdupq_n_f64(kExpArgMin));
    x = vminq_f64(x, vdupq_n_f64(kExpArgMax));
    const float64x2_t n = vrndnq_f64(vmulq_f64(x, vdupq_n_f64(1.4426950408889634)));
    float64x2_t r = vsubq_f64(x, vmulq_f64(n, vdupq_n_f64(6.93147180369123816490e-01)));
    r = vsubq_f64(r, vmulq_f64(n, vdupq_n_f64(1.90821492927058770002e-10)));

    static constexpr double coeff[] = {
        1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0, 1.0 / 40320.0,
        1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,     1.0 / 6.0,
        0.5,               1.0,              1.0,
    };
    float64x2_t p = vdupq_n_f64(coeff[0]);
    for (int i = 1; i < 13; ++i) p = vaddq_f64(vmulq_f64(p, r), vdupq_n_f64(coeff[i]));

    const int64x2_t bits = vshlq_n_s64(vaddq_s64(vcvtq_s64_f64(n), vdupq_n_s64(1023)), 52);
    return vbslq_f64(tiny, vdupq_n_f64(0.0), vmulq_f64(p, vreinterpretq_f64_s64(bits)));
}

double log_sum_exp(const double* cost, const double* pot, double inv_eta, std::size_t m) {
    const float64x2_t scale = vdupq_n_f64(inv_eta);
    float64x2_t vmax = vdupq_n_f64(-std::numeric_limits<double>::infinity());
    std::size_t j = 0;
    for (; j + 2 <= m; j += 2)
        vmax = vmaxq_f64(vmax, vmulq_f64(vsubq_f64(vld1q_f64(pot + j), vld1q_f64(cost + j)), scale));
    double hi = vmaxvq_f64(vmax);
    for (std::size_t t = j; t < m; ++t) {
        const double s = (pot[t] - cost[t]) * inv_eta;
        if (s > hi) hi = s;
    }
    const float64x2_t shift = vdupq_n_f64(hi);
    float64x2_t vsum = vdupq_n_f64(0.0);
    for (j = 0; j + 2 <= m; j += 2) {
        const float64x2_t s = vmulq_f64(vsubq_f64(vld1q_f64(pot + j), vld1q_f64(cost + j)), scale);
        vsum = vaddq_f64(vsum, exp2v(vsubq_f64(s, shift)));
    }
    double sum = vaddvq_f64(vsum);
    for (std::size_t t = j; t < m; ++t) sum += std::exp((pot[t] - cost[t]) * inv_eta - hi);
    return hi + std::log(sum);
}

double gibbs_row(const double* cost, const double* pot, double shift, double inv_eta, std::size_t m,
                 double* out) {
    const float64x2_t scale = vdupq_n_f64(inv_eta);
    const float64x2_t vshift = vdupq_n_f64(shift);
    float64x2_t vsum = vdupq_n_f64(0.0);
    std::size_t j = 0;
    for (; j + 2 <= m; j += 2) {
        const float64x2_t arg =
            vmulq_f64(vsubq_f64(vaddq_f64(vshift, vld1q_f64(pot + j)), vld1q_f64(cost + j)), scale);
        const float64x2_t e = exp2v(arg);
        vst1q_f64(out + j, e);
        vsum = vaddq_f64(vsum, e);
    }
    double sum = vaddvq_f64(vsum);
    for (; j < m; ++j) {
        out[j] = std::exp((shift + pot[j] - cost[j]) * inv_eta);
        sum += out[j];
    }
    return sum;
}

ReducedCostMin min_reduced_cost(const double* cost, const std::int8_t* state, double pi_src,
                                const double* pi_tgt, std::size_t m) {
    // Pricing is memory bound and branchy on NEON; the scalar loop is used as is.
    return scalar_set.min_reduced_cost(cost, state, pi_src, pi_tgt, m);
}

} // namespace

const KernelSet neon_set{
    Isa::neon, "neon", sq_dist_batch, min_update, log_sum_exp, gibbs_row, min_reduced_cost,
};

} // namespace quantot::kernels::detail

#endif
