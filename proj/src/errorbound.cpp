#include "ebound/errorbound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ebound/errors.hpp"
#include "ebound/kernels.hpp"
#include "ebound/local_search.hpp"
#include "ebound/parallel.hpp"
#include "ebound/random.hpp"

namespace ebound {

SampleCloud build_cloud(const SublevelSet& s, std::span<const double> scales, const CloudConfig& cfg,
                        std::span<const Point> extra) {
    if (scales.empty()) throw Error("cloud needs at least one scale");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] > 0.0)) throw Error("scales must be positive");
        if (i > 0 && !(scales[i] > scales[i - 1])) throw Error("scales must be increasing");
    }
    if (cfg.per_annulus <= 0) throw Error("per_annulus must be positive");
    const auto n = static_cast<std::size_t>(s.f.arity());

    std::vector<Point> raw;
    for (std::size_t j = 0; j < scales.size(); ++j) {
        Rng rng(derive_seed(cfg.sampler.seed, {0xC10DULL, static_cast<std::uint64_t>(j)}));
        const double lo = j == 0 ? 0.0 : scales[j - 1];
        for (int i = 0; i < cfg.per_annulus; ++i) {
            Point p = rng.unit_vector(n);
            const double r = rng.uniform(lo, scales[j]);
            for (double& c : p) c *= r;
            raw.push_back(std::move(p));
        }
    }
    for (const auto& p : extra) {
        if (p.size() != n) throw ArityError("extra cloud point has the wrong dimension");
        raw.push_back(p);
    }

    std::vector<std::optional<CloudPoint>> slots(raw.size());
    SamplerConfig inner = cfg.sampler;
    inner.threads = 1;
    parallel_for(raw.size(), cfg.sampler.threads, [&](std::size_t i) {
        auto v = try_evaluate(s.f, raw[i]);
        if (!v) return;
        CloudPoint cp;
        cp.x = raw[i];
        cp.f = *v;
        cp.fplus = std::max(0.0, *v);
        const double r = norm(cp.x);
        cp.scale = static_cast<std::size_t>(std::lower_bound(scales.begin(), scales.end(), r) - scales.begin());
        cp.scale = std::min(cp.scale, scales.size() - 1);
        cp.in_s = *v <= s.member_tol;
        if (!cp.in_s) {
            ProjectionResult pr;
            try {
                pr = distance_to_sublevel(s, cp.x, inner);
            } catch (const DomainError&) {
                return;
            }
            if (!pr.converged) return;
            cp.d = pr.dist;
        }
        slots[i] = std::move(cp);
    });

    SampleCloud cloud;
    cloud.scales.assign(scales.begin(), scales.end());
    cloud.seed = cfg.sampler.seed;
    cloud.per_annulus = cfg.per_annulus;
    cloud.imported = extra.size();
    for (auto& slot : slots) {
        if (slot)
            cloud.points.push_back(std::move(*slot));
        else
            ++cloud.excluded;
    }
    return cloud;
}

std::vector<double> default_exponent_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 36; ++k) g.push_back(k / 12.0);
    return g;
}

std::vector<double> default_hormander_beta_grid() {
    auto g = default_exponent_grid();
    g.insert(g.begin(), 0.0);
    return g;
}

namespace {

// Ratio arrays r_i = num_i / (a_i + b_i) for one exponent pair.
struct Terms {
    std::vector<double> num, den_a, den_b;
};

struct Choice {
    std::size_t ia = 0, ib = 0;
    kernels::RatioScan scan;
    double fill = -1.0;
};

void check_grids(std::span<const double> alpha_grid, std::span<const double> beta_grid, bool zero_beta) {
    if (alpha_grid.empty() || beta_grid.empty()) throw FitError(FitError::Kind::bad_input, "empty exponent grid");
    for (double a : alpha_grid)
        if (!(a > 0.0) || !std::isfinite(a)) throw FitError(FitError::Kind::bad_input, "alpha must be positive");
    for (double b : beta_grid)
        if (!std::isfinite(b) || b < 0.0 || (b == 0.0 && !zero_beta))
            throw FitError(FitError::Kind::bad_input, "beta out of range");
}

std::vector<const CloudPoint*> outside(const SampleCloud& cloud) {
    std::vector<const CloudPoint*> out;
    for (const auto& p : cloud.points)
        if (!p.in_s) out.push_back(&p);
    if (out.empty()) throw FitError(FitError::Kind::nothing_to_fit, "every cloud point lies in S");
    return out;
}

// Picks the pair with the largest fill; `make` fills the ratio terms.
template <class Make>
Choice choose(std::span<const double> alpha_grid, std::span<const double> beta_grid, std::size_t count, Make&& make) {
    Choice best;
    Terms t;
    for (std::size_t ia = 0; ia < alpha_grid.size(); ++ia) {
        for (std::size_t ib = 0; ib < beta_grid.size(); ++ib) {
            make(ia, ib, t);
            auto scan = kernels::ratio_scan(t.num, t.den_a, t.den_b);
            const double fill = scan.max > 0.0 ? scan.sum / (static_cast<double>(count) * scan.max) : 0.0;
            if (fill > best.fill + 1e-12) {
                best.ia = ia;
                best.ib = ib;
                best.scan = scan;
                best.fill = fill;
            }
        }
    }
    return best;
}

std::vector<Point> worst_points(const Terms& t, const std::vector<const CloudPoint*>& pts, std::size_t k) {
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto ratio = [&](std::size_t i) { return t.num[i] / (t.den_a[i] + t.den_b[i]); };
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double ra = ratio(a), rb = ratio(b);
                          return ra != rb ? ra > rb : a < b;
                      });
    std::vector<Point> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(pts[idx[i]]->x);
    return out;
}

// Largest ratio over points that are not in the outermost shell.
std::optional<double> inner_max(const Terms& t, const std::vector<const CloudPoint*>& pts, std::size_t last) {
    if (last == 0) return std::nullopt;
    std::optional<double> m;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i]->scale >= last) continue;
        const double r = t.num[i] / (t.den_a[i] + t.den_b[i]);
        if (!m || r > *m) m = r;
    }
    return m;
}

}  // namespace

HolderFit fit_holder(const SampleCloud& cloud, std::span<const double> alpha_grid,
                     std::span<const double> beta_grid, double stability_margin) {
    check_grids(alpha_grid, beta_grid, false);
    auto pts = outside(cloud);
    const std::size_t N = pts.size();

    auto powers = [&](std::span<const double> grid) {
        std::vector<std::vector<double>> out(grid.size(), std::vector<double>(N));
        for (std::size_t g = 0; g < grid.size(); ++g)
            for (std::size_t i = 0; i < N; ++i) out[g][i] = std::pow(pts[i]->fplus, grid[g]);
        return out;
    };
    const auto pa = powers(alpha_grid), pb = powers(beta_grid);
    std::vector<double> d(N);
    for (std::size_t i = 0; i < N; ++i) d[i] = pts[i]->d;

    auto make = [&](std::size_t ia, std::size_t ib, Terms& t) {
        t.num = d;
        t.den_a = pa[ia];
        t.den_b = pb[ib];
    };
    Choice best = choose(alpha_grid, beta_grid, N, make);

    HolderFit fit;
    fit.alpha = alpha_grid[best.ia];
    fit.beta = beta_grid[best.ib];
    fit.c = best.scan.max;
    fit.fill = best.fill;
    fit.used = N;
    Terms t;
    make(best.ia, best.ib, t);
    fit.support = worst_points(t, pts, 3);
    fit.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < N; ++i) {
        const double bound = fit.c * (t.den_a[i] + t.den_b[i]);
        fit.max_violation = std::max(fit.max_violation, (d[i] - bound) / std::max(d[i], bound));
    }
    fit.c_previous = inner_max(t, pts, cloud.scales.size() - 1);
    fit.stable = fit.c_previous && *fit.c_previous > 0.0 &&
                 std::fabs(fit.c - *fit.c_previous) < stability_margin * *fit.c_previous;
    return fit;
}

HormanderFit fit_hormander(const SampleCloud& cloud, std::span<const double> alpha_grid,
                           std::span<const double> beta_grid, double stability_margin) {
    check_grids(alpha_grid, beta_grid, true);
    auto pts = outside(cloud);
    const std::size_t N = pts.size();

    std::vector<double> f(N), r(N);
    for (std::size_t i = 0; i < N; ++i) {
        f[i] = pts[i]->fplus;
        r[i] = norm(pts[i]->x);
    }
    auto make = [&](std::size_t ia, std::size_t ib, Terms& t) {
        t.num.resize(N);
        t.den_b.resize(N);
        t.den_a = f;
        for (std::size_t i = 0; i < N; ++i) {
            t.num[i] = std::pow(pts[i]->d, alpha_grid[ia]);
            t.den_b[i] = f[i] * std::pow(r[i], beta_grid[ib]);
        }
    };
    Choice best = choose(alpha_grid, beta_grid, N, make);

    // The ratio is d^alpha / ([f]_+ (1 + |x|^beta)), so c is its reciprocal.
    HormanderFit fit;
    fit.alpha = alpha_grid[best.ia];
    fit.beta = beta_grid[best.ib];
    fit.c = best.scan.max > 0.0 ? 1.0 / best.scan.max : std::numeric_limits<double>::infinity();
    fit.fill = best.fill;
    fit.used = N;
    Terms t;
    make(best.ia, best.ib, t);
    fit.support = worst_points(t, pts, 3);
    fit.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < N; ++i) {
        const double lhs = t.den_a[i] + t.den_b[i], rhs = fit.c * t.num[i];
        fit.max_violation = std::max(fit.max_violation, (rhs - lhs) / std::max(rhs, lhs));
    }
    if (auto m = inner_max(t, pts, cloud.scales.size() - 1); m && *m > 0.0) fit.c_previous = 1.0 / *m;
    fit.stable = fit.c_previous && std::isfinite(fit.c) &&
                 std::fabs(fit.c - *fit.c_previous) < stability_margin * *fit.c_previous;
    return fit;
}

std::string_view verdict_name(VerdictKind k) {
    switch (k) {
        case VerdictKind::holds: return "Holds";
        case VerdictKind::fails_near: return "FailsNear";
        case VerdictKind::fails_far: return "FailsFar";
        case VerdictKind::inconclusive: return "Inconclusive";
    }
    return "?";
}

GlobalVerdict global_verdict(const TrendVerdict& near, const TrendVerdict& far, std::span<const PSVerdict> ps,
                             const std::optional<HolderFit>& holder) {
    GlobalVerdict v;
    v.fit = holder;
    if (near.kind == Trend::diverges) {
        v.kind = VerdictKind::fails_near;
        v.witness = near.witness;
        v.reasons.push_back("f -> 0 along a sequence whose distance to S does not go to 0");
        return v;
    }
    if (far.kind == Trend::diverges) {
        v.kind = VerdictKind::fails_far;
        v.witness = far.witness;
        v.reasons.push_back("distance to S grows without bound while f stays bounded");
        return v;
    }

    const bool trends_ok = near.kind == Trend::converges_to_zero && far.kind == Trend::bounded;
    if (near.kind != Trend::converges_to_zero)
        v.reasons.push_back(std::string("near trend is ") + std::string(trend_name(near.kind)));
    if (far.kind != Trend::bounded)
        v.reasons.push_back(std::string("far trend is ") + std::string(trend_name(far.kind)));
    if (!holder)
        v.reasons.push_back("no Holder fit");
    else if (!holder->stable)
        v.reasons.push_back("Holder constant is not stable across the two largest scales");
    v.kind = trends_ok && holder && holder->stable ? VerdictKind::holds : VerdictKind::inconclusive;

    bool any_ps = false, all_hold = true, any_fail = false;
    for (const auto& p : ps) {
        if (p.level < 0.0) continue;
        any_ps = true;
        all_hold = all_hold && p.status == PSStatus::holds;
        any_fail = any_fail || p.status == PSStatus::fails;
    }
    // The upgrade only covers an unstable fit, so holds always comes with
    // converging near and bounded far trends.
    if (v.kind == VerdictKind::inconclusive && trends_ok && any_ps && all_hold) {
        v.kind = VerdictKind::holds;
        v.warnings.push_back("holds from Palais-Smale at every tested level; the fit alone was not stable");
    }
    if (v.kind == VerdictKind::holds && any_fail) {
        v.kind = VerdictKind::inconclusive;
        v.reasons.push_back("Palais-Smale fails at some level t >= 0");
        v.warnings.push_back("palais_smale_fails");
    }
    if (v.kind == VerdictKind::holds) v.reasons.clear();
    return v;
}

}  // namespace ebound
