#pragma once

#include "quantot/kernels.hpp"

namespace quantot::kernels::detail {

extern const KernelSet scalar_set;

// Defined only on targets where the variant is compiled in; the dispatcher
// checks CPU support before handing them out.
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelSet avx2_set;
#endif
#if defined(__aarch64__) && defined(__ARM_NEON)
extern const KernelSet neon_set;
#endif

// Exponential argument clamp used by the vector variants. exp(-700) ~ 1e-304
// is negligible against the max-shifted sums the kernels produce.
inline constexpr double kExpArgMin = -700.0;
inline constexpr double kExpArgMax = 700.0;

} // namespace quantot::kernels::detail
