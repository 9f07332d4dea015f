#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebound/distance.hpp"
#include "ebound/expr.hpp"

namespace ebound {

/// Positive, strictly increasing levels with two index windows:
/// [near_begin, near_end) for t -> 0+ and [far_begin, far_end) for large t.
struct LevelGrid {
    std::vector<double> levels;
    std::size_t near_begin = 0, near_end = 0;
    std::size_t far_begin = 0, far_end = 0;

    /// `count` geometric levels from `lo` to `hi`; the near window is the
    /// smallest `near_count` levels, the far window the largest `far_count`.
    static LevelGrid geometric(double lo, double hi, std::size_t count, std::size_t near_count = 8,
                               std::size_t far_count = 8);
    static LevelGrid from_levels(std::vector<double> levels, std::size_t near_count,
                                 std::size_t far_count);

    std::span<const double> near() const;
    std::span<const double> far() const;
};

/// Geometric radius schedule r0, r0 * factor, ..., `count` entries.
std::vector<double> geometric_radii(double r0, double factor, std::size_t count);

struct FiberConfig {
    SamplerConfig sampler;
    double member_tol = 1e-16;
    int line_count = 0;         // <= 0: 2n + 8 lines per cell
    int newton_starts = 24;     // level-corrected random starts per cell
    int distance_candidates = 8;
    int slope_candidates = 8;
    int tangent_iters = 60;     // pattern-search steps along a fiber for phi
    int sweep_steps = 120;      // steps per coordinate sweep along a fiber
    double level_rel_tol = 1e-9;
    double divergence_factor = 2.0;
    double zero_band = 1e-2;
    double radius_stability = 0.05;
    std::size_t min_fit_levels = 4;
    double min_hit_fraction = 0.5;  // below: verdict undetermined
    double t_max = 0.0;             // escape-search level; <= 0: lowest far-window level
    int escape_starts = 32;
};

/// Cell matrices are radius-major: mu[r][l] is the estimate for radii[r] and
/// levels[l]. Missing cells are empty optionals.
struct FiberProfile {
    LevelGrid grid;
    std::vector<double> radii;
    std::vector<std::vector<std::optional<double>>> mu;
    std::vector<std::vector<std::optional<double>>> phi;
    std::vector<std::vector<int>> fiber_hits;
    std::vector<std::vector<Point>> mu_witness;   // maximizer behind each mu cell
    std::vector<std::vector<Point>> phi_witness;  // minimizer behind each phi cell
};

/// Points on {f = t} inside the ball of radius R found by root bracketing
/// along lines and by level correction from random starts.
std::vector<Point> sample_fiber(const FunctionHandle& f, double t, double radius,
                                std::uint64_t seed, const FiberConfig& cfg);

/// mu_R(t) = sup d(x, S) over sampled fiber points, and phi_R(t) = inf m_f
/// over sampled points of {|f| = t}, accumulated monotonically over radii.
FiberProfile fiber_profile(const SublevelSet& s, const LevelGrid& grid,
                           std::span<const double> radii, const FiberConfig& cfg);

/// fiber_profile with only the mu cells filled.
FiberProfile mu_profile(const SublevelSet& s, const LevelGrid& grid,
                        std::span<const double> radii, const FiberConfig& cfg);

/// fiber_profile with only the phi cells filled.
FiberProfile phi_profile(const FunctionHandle& f, const LevelGrid& grid,
                         std::span<const double> radii, const FiberConfig& cfg);

enum class Trend { converges_to_zero, bounded, diverges, undetermined };
std::string_view trend_name(Trend t);

struct Witness {
    Point x;
    double f = 0.0;
    double d = 0.0;
    double radius = 0.0;
};

struct TrendVerdict {
    Trend kind = Trend::undetermined;
    std::vector<std::optional<double>> evidence;  // per-radius tail value
    std::vector<Witness> witness;                 // set when kind == diverges
    std::string note;
};

/// Tail of the near-zero window as R grows. Diverges when three consecutive
/// tails each grow by divergence_factor; converges when mu at the smallest
/// level and largest radius is within zero_band.
TrendVerdict classify_near(const FiberProfile& profile, const FiberConfig& cfg);

/// Escape search for points with f <= t_max and large d(x, S) on each radius.
/// Diverges means the far hypothesis fails.
TrendVerdict classify_far(const FiberProfile& profile, const SublevelSet& s, const FiberConfig& cfg);

struct ExponentFit {
    double c = 0.0;
    double q = 0.0;
    double r2 = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
    std::size_t used = 0;
};

enum class ProfileKind { mu_near_zero, phi_near_zero };

/// Log-log least squares of the chosen profile over the near window at the
/// largest radius. Throws FitError when cells move by more than
/// radius_stability between the two largest radii or fewer than
/// min_fit_levels cells are usable.
ExponentFit fit_exponent(const FiberProfile& profile, ProfileKind which, const FiberConfig& cfg);

/// CSV with header level,radius,mu,phi,fiber_hits; missing cells are empty.
std::string profile_csv(const FiberProfile& profile);

}  // namespace ebound
