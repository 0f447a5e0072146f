#include "variants.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <limits>

#define QUANTOT_AVX2 __attribute__((target("avx2")))

namespace quantot::kernels::detail {
namespace {

// Strided loads of coordinate t from four consecutive rows.
QUANTOT_AVX2 inline __m256d load_column(const double* rows, std::size_t t, __m256i offsets) {
    return _mm256_i64gather_pd(rows + t, offsets, 8);
}

QUANTOT_AVX2 inline __m256i row_offsets(std::size_t d) {
    const auto s = static_cast<long long>(d);
    return _mm256_setr_epi64x(0, s, 2 * s, 3 * s);
}

// Four squared distances, accumulated coordinate by coordinate in the same
// order as the scalar loop so results match bit for bit.
QUANTOT_AVX2 inline __m256d sq_dist4(const double* x, const double* rows, std::size_t d, __m256i offsets) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t t = 0; t < d; ++t) {
        const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(x[t]), load_column(rows, t, offsets));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    return acc;
}

QUANTOT_AVX2 void sq_dist_batch(const double* x, const double* Y, std::size_t m, std::size_t d, double* out) {
    const __m256i offsets = row_offsets(d);
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) _mm256_storeu_pd(out + j, sq_dist4(x, Y + j * d, d, offsets));
    if (j < m) scalar_set.sq_dist_batch(x, Y + j * d, m - j, d, out + j);
}

QUANTOT_AVX2 void min_update(const double* X, std::size_t n, std::size_t d, const double* c,
                             std::uint32_t center, double* dist, std::uint32_t* label) {
    const __m256i offsets = row_offsets(d);
    std::size_t i = 0;
    alignas(32) double lane[4];
    for (; i + 4 <= n; i += 4) {
        const __m256d acc = sq_dist4(c, X + i * d, d, offsets);
        const __m256d old = _mm256_loadu_pd(dist + i);
        const int mask = _mm256_movemask_pd(_mm256_cmp_pd(acc, old, _CMP_LT_OQ));
        if (mask == 0) continue;
        _mm256_store_pd(lane, acc);
        for (int l = 0; l < 4; ++l) {
            if (mask & (1 << l)) {
                dist[i + l] = lane[l];
                label[i + l] = center;
            }
        }
    }
    if (i < n) scalar_set.min_update(X + i * d, n - i, d, c, center, dist + i, label + i);
}

// exp(x) for x in [kExpArgMin, kExpArgMax]: x = n ln2 + r, |r| <= ln2/2,
// degree-12 Taylor polynomial for exp(r), 2^n assembled in the exponent bits.
QUANTOT_AVX2 inline __m256d exp4(__m256d x) {
    // below the clamp the true value is (sub)normal noise; flush it to 0
    const __m256d tiny = _mm256_cmp_pd(x, _mm256_set1_pd(kExpArgMin), _CMP_LT_OQ);
    x = _mm256_max_pd(x, _mm256_set1_pd(kExpArgMin));
    x = _mm256_min_pd(x, _mm256_set1_pd(kExpArgMax));
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(n, _mm256_set1_pd(6.93147180369123816490e-01)));
    r = _mm256_sub_pd(r, _mm256_mul_pd(n, _mm256_set1_pd(1.90821492927058770002e-10)));

    static constexpr double coeff[] = {
        1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0, 1.0 / 40320.0,
        1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,     1.0 / 6.0,
        0.5,               1.0,              1.0,
    };
    __m256d p = _mm256_set1_pd(coeff[0]);
    for (int i = 1; i < 13; ++i) p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(coeff[i]));

    const __m256d magic = _mm256_set1_pd(6755399441055744.0); // 1.5 * 2^52
    const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
    return _mm256_andnot_pd(tiny, _mm256_mul_pd(p, _mm256_castsi256_pd(bits)));
}

QUANTOT_AVX2 inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

QUANTOT_AVX2 inline double hmax(__m256d v) {
    const __m128d m = _mm_max_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
    return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

QUANTOT_AVX2 double log_sum_exp(const double* cost, const double* pot, double inv_eta, std::size_t m) {
    const __m256d scale = _mm256_set1_pd(inv_eta);
    __m256d vmax = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
        const __m256d s = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(pot + j), _mm256_loadu_pd(cost + j)), scale);
        vmax = _mm256_max_pd(vmax, s);
    }
    double hi = hmax(vmax);
    for (std::size_t t = j; t < m; ++t) {
        const double s = (pot[t] - cost[t]) * inv_eta;
        if (s > hi) hi = s;
    }

    const __m256d shift = _mm256_set1_pd(hi);
    __m256d vsum = _mm256_setzero_pd();
    for (j = 0; j + 4 <= m; j += 4) {
        const __m256d s = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(pot + j), _mm256_loadu_pd(cost + j)), scale);
        vsum = _mm256_add_pd(vsum, exp4(_mm256_sub_pd(s, shift)));
    }
    double sum = hsum(vsum);
    for (std::size_t t = j; t < m; ++t) sum += std::exp((pot[t] - cost[t]) * inv_eta - hi);
    return hi + std::log(sum);
}

QUANTOT_AVX2 double gibbs_row(const double* cost, const double* pot, double shift, double inv_eta,
                              std::size_t m, double* out) {
    const __m256d scale = _mm256_set1_pd(inv_eta);
    const __m256d vshift = _mm256_set1_pd(shift);
    __m256d vsum = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
        const __m256d arg = _mm256_mul_pd(
            _mm256_sub_pd(_mm256_add_pd(vshift, _mm256_loadu_pd(pot + j)), _mm256_loadu_pd(cost + j)), scale);
        const __m256d e = exp4(arg);
        _mm256_storeu_pd(out + j, e);
        vsum = _mm256_add_pd(vsum, e);
    }
    double sum = hsum(vsum);
    for (; j < m; ++j) {
        out[j] = std::exp((shift + pot[j] - cost[j]) * inv_eta);
        sum += out[j];
    }
    return sum;
}

QUANTOT_AVX2 ReducedCostMin min_reduced_cost(const double* cost, const std::int8_t* state, double pi_src,
                                             const double* pi_tgt, std::size_t m) {
    const __m256d src = _mm256_set1_pd(pi_src);
    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d best_idx = _mm256_setzero_pd();
    __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d step = _mm256_set1_pd(4.0);
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
        int packed;
        __builtin_memcpy(&packed, state + j, 4);
        const __m256d s = _mm256_cvtepi32_pd(_mm_cvtepi8_epi32(_mm_cvtsi32_si128(packed)));
        const __m256d rc = _mm256_mul_pd(s, _mm256_sub_pd(_mm256_add_pd(_mm256_loadu_pd(cost + j), src),
                                                          _mm256_loadu_pd(pi_tgt + j)));
        const __m256d lt = _mm256_cmp_pd(rc, best, _CMP_LT_OQ);
        best = _mm256_blendv_pd(best, rc, lt);
        best_idx = _mm256_blendv_pd(best_idx, idx, lt);
        idx = _mm256_add_pd(idx, step);
    }
    alignas(32) double vals[4];
    alignas(32) double idxs[4];
    _mm256_store_pd(vals, best);
    _mm256_store_pd(idxs, best_idx);
    ReducedCostMin out{std::numeric_limits<double>::infinity(), 0};
    for (int l = 0; l < 4; ++l) {
        const auto li = static_cast<std::size_t>(idxs[l]);
        if (vals[l] < out.value || (vals[l] == out.value && li < out.index)) out = {vals[l], li};
    }
    for (; j < m; ++j) {
        const double rc = static_cast<double>(state[j]) * (cost[j] + pi_src - pi_tgt[j]);
        if (rc < out.value) out = {rc, j};
    }
    return out;
}

} // namespace

const KernelSet avx2_set{
    Isa::avx2, "avx2", sq_dist_batch, min_update, log_sum_exp, gibbs_row, min_reduced_cost,
};

} // namespace quantot::kernels::detail

#endif
