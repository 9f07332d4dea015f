#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebound/asymptotic.hpp"
#include "ebound/distance.hpp"
#include "ebound/fiber.hpp"

namespace ebound {

struct CloudPoint {
    Point x;
    double f = 0.0;
    double fplus = 0.0;  // max(0, f)
    double d = 0.0;      // upper bound on d(x, S); 0 inside S
    std::size_t scale = 0;  // index of the first scale whose ball holds x
    bool in_s = false;
};

struct SampleCloud {
    std::vector<CloudPoint> points;
    std::vector<double> scales;
    std::uint64_t seed = 0;
    int per_annulus = 0;
    std::size_t imported = 0;  // extra points supplied by the caller
    std::size_t excluded = 0;  // points dropped after evaluation or projection failures
};

struct CloudConfig {
    SamplerConfig sampler;
    double member_tol = 1e-16;
    int per_annulus = 48;
};

/// Stratified cloud: per_annulus points in each shell scales[j-1] <= |x| <=
/// scales[j] (the first shell is the ball of scales[0]), plus `extra` points
/// such as fiber maximizers.
SampleCloud build_cloud(const SublevelSet& s, std::span<const double> scales, const CloudConfig& cfg,
                        std::span<const Point> extra = {});

/// {k/12 : 1 <= k <= 36}.
std::vector<double> default_exponent_grid();

/// default_exponent_grid() with 0 in front, for the Hormander beta.
std::vector<double> default_hormander_beta_grid();

/// d <= c ([f]_+^alpha + [f]_+^beta) on the cloud.
struct HolderFit {
    double c = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double fill = 0.0;           // mean ratio / max ratio; 1 for an exact identity
    double max_violation = 0.0;  // largest relative excess of d over the bound
    std::vector<Point> support;  // worst points, largest ratio first
    std::optional<double> c_previous;  // c without the outermost shell
    bool stable = false;
    std::size_t used = 0;  // cloud points outside S
};

/// [f]_+ (1 + |x|^beta) >= c d^alpha on the cloud.
struct HormanderFit {
    double c = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double fill = 0.0;
    double max_violation = 0.0;
    std::vector<Point> support;
    std::optional<double> c_previous;
    bool stable = false;
    std::size_t used = 0;
};

/// Over every (alpha, beta) pair the constant is the worst cloud ratio; the
/// pair with the largest fill wins, earlier pairs on ties. `stable` means c
/// moved by less than stability_margin relative to the cloud without its
/// outermost shell. Throws FitError when every point is in S.
HolderFit fit_holder(const SampleCloud& cloud, std::span<const double> alpha_grid,
                     std::span<const double> beta_grid, double stability_margin = 0.25);

HormanderFit fit_hormander(const SampleCloud& cloud, std::span<const double> alpha_grid,
                           std::span<const double> beta_grid, double stability_margin = 0.25);

enum class VerdictKind { holds, fails_near, fails_far, inconclusive };
std::string_view verdict_name(VerdictKind k);

struct GlobalVerdict {
    VerdictKind kind = VerdictKind::inconclusive;
    std::optional<HolderFit> fit;
    std::vector<Witness> witness;
    std::vector<std::string> reasons;
    std::vector<std::string> warnings;
};

/// Witnesses decide first: a diverging near trend gives fails_near, a
/// diverging far trend fails_far. Holds needs a converging near trend, a
/// bounded far trend and a stable fit. Palais-Smale verdicts at levels t >= 0
/// are advisory: all holding turns an unstable fit into holds, any failure
/// turns holds into inconclusive.
GlobalVerdict global_verdict(const TrendVerdict& near, const TrendVerdict& far, std::span<const PSVerdict> ps,
                             const std::optional<HolderFit>& holder);

}  // namespace ebound
