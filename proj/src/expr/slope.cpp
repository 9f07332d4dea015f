#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "ebound/errors.hpp"
#include "ebound/expr.hpp"
#include "ebound/random.hpp"

namespace ebound {

namespace {

void push_unit(std::vector<Vec>& dirs, Vec d) {
    double n = norm(d);
    if (!(n > 0.0) || !std::isfinite(n)) return;
    for (double& c : d) c /= n;
    dirs.push_back(std::move(d));
}

}  // namespace

double strong_slope_estimate(const FunctionHandle& f, std::span<const double> x,
                             const StrongSlopeOptions& opts) {
    if (opts.h_schedule.empty()) throw Error("strong slope: empty step schedule");
    const std::size_t n = x.size();
    const double fx = evaluate(f, x);
    const std::size_t want = opts.dirs_per_h > 0 ? static_cast<std::size_t>(opts.dirs_per_h) : 2 * n + 8;
    if (want < 2 * n) throw Error("strong slope: dirs_per_h must be at least 2n");

    // Coordinate directions, descent directions of the active branches and of
    // the min-norm subgradient, then random fill.
    std::vector<Vec> dirs;
    for (std::size_t i = 0; i < n; ++i) {
        Vec e(n, 0.0);
        e[i] = 1.0;
        dirs.push_back(e);
        e[i] = -1.0;
        dirs.push_back(e);
    }
    try {
        SubdiffHull hull = subdiff_generators(f, x, opts.tie_tol);
        MinNormResult mn = min_norm_point(hull);
        Vec d = mn.point;
        for (double& c : d) c = -c;
        push_unit(dirs, std::move(d));
        for (const auto& g : hull.generators) {
            Vec gd = g;
            for (double& c : gd) c = -c;
            push_unit(dirs, std::move(gd));
        }
    } catch (const Error&) {
        // singular derivative: rely on sampled directions only
    }
    Rng rng(derive_seed(opts.seed, {static_cast<std::uint64_t>(n)}));
    while (dirs.size() < want) dirs.push_back(rng.unit_vector(n));

    std::vector<double> hs = opts.h_schedule;
    std::sort(hs.begin(), hs.end());
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::fabs(fx) + 1.0);
    Vec probe(n);
    auto quotient = [&](const Vec& d, double h) -> std::optional<double> {
        for (std::size_t j = 0; j < n; ++j) probe[j] = x[j] + h * d[j];
        try {
            return (fx - evaluate(f, probe)) / h;
        } catch (const DomainError&) {
            return std::nullopt;
        }
    };
    for (double h : hs) {
        bool any = false;
        double best = 0.0;
        for (const auto& d : dirs) {
            auto q1 = quotient(d, h);
            if (!q1) continue;
            any = true;
            double q = *q1;
            if (opts.extrapolate) {
                auto q2 = quotient(d, 2.0 * h), q4 = quotient(d, 4.0 * h);
                if (q2 && q4) {
                    const double e1 = *q1 - *q2, e2 = *q2 - *q4;
                    const double tiny = noise / h;
                    // A smooth expansion gives e2 / e1 close to 2.
                    if (std::fabs(e1) <= tiny || (e2 / e1 >= 1.5 && e2 / e1 <= 2.5)) q = *q1 + e1;
                }
            }
            best = std::max(best, std::max(q, 0.0));
        }
        if (any) return best;
    }
    throw DomainError("every strong-slope probe left the domain", to_infix(*f.root()));
}

SlopeEstimate estimate_slopes(const FunctionHandle& f, std::span<const double> x,
                              const StrongSlopeOptions& opts) {
    SlopeEstimate s;
    SubdiffHull hull = subdiff_generators(f, x, opts.tie_tol);
    s.m_f = min_norm_point(hull).norm;
    s.strong = strong_slope_estimate(f, x, opts);
    if (hull.generators.size() == 1) {
        s.smooth = true;
        s.grad_norm = norm(hull.generators.front());
    }
    return s;
}

}  // namespace ebound
