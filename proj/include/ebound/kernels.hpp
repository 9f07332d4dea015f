#pragma once

// Data-parallel inner loops used by the error-bound fits and the fiber
// candidate ranking. Each kernel has a portable scalar reference and an AVX2
// variant; the variant is chosen at runtime from the CPU features and the
// EBOUND_ISA environment variable ("scalar" or "avx2").
//
// Both variants perform the same IEEE operations in the same order per lane,
// so their results are bit-identical. The scalar reference accumulates sums
// in four interleaved lanes to mirror the 256-bit register layout.

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>

namespace ebound::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// True if the CPU can run the given variant.
bool supported(Isa isa);

/// Variant used by the dispatching entry points.
Isa active_isa();

/// Overrides the dispatch choice. Throws std::invalid_argument if the CPU does
/// not support `isa`.
void set_isa(Isa isa);

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

struct RatioScan {
    double max = -std::numeric_limits<double>::infinity();
    std::size_t argmax = npos;  // first index attaining max
    double sum = 0.0;
};

/// Scans r_i = num[i] / (den_a[i] + den_b[i]).
RatioScan ratio_scan(std::span<const double> num, std::span<const double> den_a,
                     std::span<const double> den_b);

struct Nearest {
    double sq_dist = std::numeric_limits<double>::infinity();
    std::size_t index = npos;  // first index attaining the minimum
};

/// Nearest of `count` points stored coordinate-major (coords[k * count + i])
/// to `query`, by squared Euclidean distance.
Nearest nearest(std::span<const double> query, std::span<const double> coords, std::size_t count);

namespace scalar {
RatioScan ratio_scan(std::span<const double> num, std::span<const double> den_a,
                     std::span<const double> den_b);
Nearest nearest(std::span<const double> query, std::span<const double> coords, std::size_t count);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define EBOUND_HAVE_AVX2_KERNELS 1
namespace avx2 {
RatioScan ratio_scan(std::span<const double> num, std::span<const double> den_a,
                     std::span<const double> den_b);
Nearest nearest(std::span<const double> query, std::span<const double> coords, std::size_t count);
}  // namespace avx2
#endif

}  // namespace ebound::kernels
