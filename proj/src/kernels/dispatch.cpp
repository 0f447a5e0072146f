#include "quantot/errors.hpp"
#include "variants.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace quantot::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelSet* best_available() {
    if (const KernelSet* k = avx2()) return k;
    if (const KernelSet* k = neon()) return k;
    return &scalar();
}

const KernelSet* initial_selection() {
    if (const char* env = std::getenv("QUANTOT_ISA")) {
        const Isa isa = parse_isa(env);
        for (const KernelSet* k : available())
            if (k->isa == isa) return k;
        throw InputError(std::string("QUANTOT_ISA=") + env + " is not supported on this machine");
    }
    return best_available();
}

std::atomic<const KernelSet*>& current() {
    static std::atomic<const KernelSet*> selected{initial_selection()};
    return selected;
}

} // namespace

const KernelSet& scalar() { return detail::scalar_set; }

const KernelSet* avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    static const bool ok = cpu_has_avx2();
    return ok ? &detail::avx2_set : nullptr;
#else
    return nullptr;
#endif
}

const KernelSet* neon() {
#if defined(__aarch64__) && defined(__ARM_NEON)
    return &detail::neon_set;
#else
    return nullptr;
#endif
}

std::vector<const KernelSet*> available() {
    std::vector<const KernelSet*> out{&scalar()};
    if (const KernelSet* k = avx2()) out.push_back(k);
    if (const KernelSet* k = neon()) out.push_back(k);
    return out;
}

const KernelSet& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
    for (const KernelSet* k : available()) {
        if (k->isa == isa) {
            current().store(k, std::memory_order_release);
            return;
        }
    }
    throw InputError("requested kernel ISA is not available on this machine");
}

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    if (name == "neon") return Isa::neon;
    throw InputError("unknown kernel ISA '" + std::string(name) + "' (expected scalar, avx2 or neon)");
}

} // namespace quantot::kernels
