#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ebound/kernels.hpp"

namespace ebound::kernels {

namespace {

Isa initial_isa() {
    Isa best = supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
    if (const char* env = std::getenv("EBOUND_ISA")) {
        std::string v(env);
        if (v == "scalar") return Isa::scalar;
        if (v == "avx2" && supported(Isa::avx2)) return Isa::avx2;
    }
    return best;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool supported(Isa isa) {
    if (isa == Isa::scalar) return true;
#ifdef EBOUND_HAVE_AVX2_KERNELS
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (!supported(isa)) throw std::invalid_argument("ISA not supported: " + std::string(isa_name(isa)));
    current().store(isa, std::memory_order_relaxed);
}

RatioScan ratio_scan(std::span<const double> num, std::span<const double> den_a,
                     std::span<const double> den_b) {
#ifdef EBOUND_HAVE_AVX2_KERNELS
    if (active_isa() == Isa::avx2) return avx2::ratio_scan(num, den_a, den_b);
#endif
    return scalar::ratio_scan(num, den_a, den_b);
}

Nearest nearest(std::span<const double> query, std::span<const double> coords, std::size_t count) {
#ifdef EBOUND_HAVE_AVX2_KERNELS
    if (active_isa() == Isa::avx2) return avx2::nearest(query, coords, count);
#endif
    return scalar::nearest(query, coords, count);
}

}  // namespace ebound::kernels
