#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebound/distance.hpp"
#include "ebound/expr.hpp"

namespace ebound {

struct KinfConfig {
    SamplerConfig sampler;
    double eps_rel = 1e-3;        // slab half-width eps_rel * max(1, |t|)
    double zero_band = 1e-3;      // final decay value must fall below this
    double decay_factor = 1.5;    // per-annulus shrink factor
    double ps_floor = 1e-2;
    double dense_fraction = 0.5;  // flagged share of levels that raises a warning
    int starts = 12;              // slab starts per (level, annulus) cell
    int lm_iters = 40;
};

/// One annulus R <= |x| <= 2R at one level. `s` is the smallest m_f found in
/// the slab |f - t| <= eps, empty when no slab point was found.
struct DecayCell {
    double radius = 0.0;
    std::optional<double> s;
    Point at;
};

struct LevelScan {
    double level = 0.0;
    double eps = 0.0;
    std::vector<DecayCell> cells;
    bool flagged = false;
    bool undetermined = false;     // most cells empty
    std::vector<DecayCell> witness;  // the decaying run when flagged
};

struct CriticalValueReport {
    std::vector<LevelScan> levels;
    std::vector<double> flagged;
    std::vector<std::string> warnings;
};

/// Default levels: 21 points on [-2, 2].
std::vector<double> default_kinf_levels();

/// Default annulus radii: 4^j for j = 1..13.
std::vector<double> default_kinf_radii();

/// Scan for asymptotic critical values. A level is flagged when some three
/// consecutive annuli have s shrinking by decay_factor at each step and the
/// last of them is below zero_band.
CriticalValueReport detect_kinf(const FunctionHandle& f, std::span<const double> levels,
                                std::span<const double> radii, const KinfConfig& cfg);

enum class PSStatus { holds, fails, undetermined };
std::string_view ps_status_name(PSStatus s);

struct PSVerdict {
    double level = 0.0;
    PSStatus status = PSStatus::undetermined;
    std::vector<DecayCell> witness;  // set when status == fails
    std::optional<double> inner_min_slope;  // smallest m_f seen inside the first radius
    std::string note;
};

/// Palais-Smale at level t from a single-level scan. Fails iff the level is
/// flagged; holds when no annulus has slab slopes below ps_floor, so that
/// near-critical slab points stay inside the innermost ball.
PSVerdict check_palais_smale(const FunctionHandle& f, double t, std::span<const double> radii,
                             const KinfConfig& cfg);

/// Verdict from an already computed level scan.
PSVerdict palais_smale_from_scan(const FunctionHandle& f, const LevelScan& scan, const KinfConfig& cfg);

/// CSV with header level,radius,s; empty s for cells without slab points.
std::string decay_csv(const CriticalValueReport& report);

}  // namespace ebound
