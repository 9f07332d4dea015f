#include "ebound/distance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "ebound/errors.hpp"
#include "ebound/kernels.hpp"
#include "ebound/local_search.hpp"
#include "ebound/random.hpp"

namespace ebound {

AnchorSet::AnchorSet(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) return;
    const std::size_t dim = points_.front().size();
    const std::size_t count = points_.size();
    coords_.resize(dim * count);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t k = 0; k < dim; ++k) coords_[k * count + i] = points_[i][k];
}

std::pair<std::size_t, double> AnchorSet::nearest(std::span<const double> x) const {
    auto r = kernels::nearest(x, coords_, points_.size());
    return {r.index, std::sqrt(r.sq_dist)};
}

std::vector<std::size_t> AnchorSet::nearest_k(std::span<const double> x, std::size_t k) const {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) d.emplace_back(distance(x, points_[i]), i);
    k = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
    return out;
}

bool member(const SublevelSet& s, std::span<const double> x) {
    return evaluate(s.f, x) <= s.member_tol;
}

namespace {

double restore_target(double member_tol, double f0) {
    return -std::max(member_tol, 1e-14 * (1.0 + std::fabs(f0)));
}

std::optional<Point> restore(const FunctionHandle& f, const Point& y, double member_tol, int iters) {
    auto fy = try_evaluate(f, y);
    if (!fy) return std::nullopt;
    LevelSolveOptions opts;
    opts.max_iters = iters;
    return solve_level(f, y, restore_target(member_tol, *fy),
                       [member_tol](double v) { return v <= member_tol; }, opts);
}

bool feasible(const FunctionHandle& f, std::span<const double> y, double tol) {
    auto v = try_evaluate(f, y);
    return v && *v <= tol;
}

// Walks from infeasible x toward feasible z and returns the feasible end of
// the bracket around the first detected boundary crossing.
Point bisect_to_boundary(const FunctionHandle& f, std::span<const double> x, const Point& z,
                         double tol) {
    const std::size_t n = x.size();
    double lo = 0.0, hi = 1.0;
    Point p(n);
    for (int it = 0; it < 80 && hi - lo > 1e-17; ++it) {
        double mid = 0.5 * (lo + hi);
        for (std::size_t j = 0; j < n; ++j) p[j] = x[j] + mid * (z[j] - x[j]);
        // Points outside the domain count as infeasible.
        if (feasible(f, p, tol)) hi = mid;
        else lo = mid;
    }
    for (std::size_t j = 0; j < n; ++j) p[j] = x[j] + hi * (z[j] - x[j]);
    if (!feasible(f, p, tol)) return z;
    return p;
}

struct StartResult {
    Point projected;
    double dist = std::numeric_limits<double>::infinity();
    bool ok = false;
};

// `incumbent` is the best distance found by earlier starts; boundary points
// far behind it skip the refinement stage.
StartResult project_from(const SublevelSet& s, std::span<const double> x, const Point& start,
                         const SamplerConfig& cfg, double incumbent) {
    const FunctionHandle& f = s.f;
    const std::size_t n = x.size();
    const double tol = s.member_tol;

    // Exterior penalty rounds on |y - x|^2 + rho [f(y)]_+^2.
    Point y = start;
    double rho = cfg.penalty_weight;
    const int per_round = std::max(1, cfg.max_iters / std::max(1, cfg.penalty_rounds));
    for (int round = 0; round < cfg.penalty_rounds; ++round, rho *= cfg.penalty_growth) {
        SmoothObjective obj = [&](std::span<const double> p, Vec& g) -> std::optional<double> {
            auto fv = try_evaluate(f, p);
            if (!fv) return std::nullopt;
            double val = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double d = p[j] - x[j];
                val += d * d;
                g[j] = 2.0 * d;
            }
            double plus = std::max(*fv, 0.0);
            if (plus > 0.0) {
                auto dg = descent_direction(f, p);
                if (!dg) return std::nullopt;
                val += rho * plus * plus;
                for (std::size_t j = 0; j < n; ++j) g[j] += 2.0 * rho * plus * (*dg)[j];
            }
            return val;
        };
        y = bfgs_minimize(obj, y, per_round, cfg.armijo, cfg.backtrack).x;
    }

    // Feasibility polish.
    std::optional<Point> z;
    auto consider = [&](const Point& c) {
        if (!feasible(f, c, tol)) return;
        if (!z || distance(x, c) < distance(x, *z)) z = c;
    };
    consider(y);
    if (!feasible(f, y, tol))
        if (auto r = restore(f, y, tol, cfg.max_iters)) consider(*r);
    consider(start);
    if (!z) return {};

    Point p = bisect_to_boundary(f, x, *z, tol);
    double best = distance(x, p);

    if (best > 1.5 * incumbent) return {p, best, true};

    // Linearised projection steps along the boundary.
    for (int it = 0; it < 30; ++it) {
        auto g = descent_direction(f, p);
        if (!g) break;
        double gg = 0.0, gx = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            gg += (*g)[j] * (*g)[j];
            gx += (*g)[j] * (x[j] - p[j]);
        }
        if (!(gg > 0.0)) break;
        auto fp = try_evaluate(f, p);
        if (!fp) break;
        double c = (*fp + gx) / gg;
        Point target(n);
        for (std::size_t j = 0; j < n; ++j) target[j] = x[j] - c * (*g)[j];

        bool improved = false;
        bool stalled = false;
        double alpha = 1.0;
        for (int bt = 0; bt < 4 && !improved; ++bt, alpha *= 0.25) {
            Point q(n);
            for (std::size_t j = 0; j < n; ++j) q[j] = p[j] + alpha * (target[j] - p[j]);
            if (!feasible(f, q, tol)) {
                auto r = restore(f, q, tol, 30);
                if (!r) continue;
                q = std::move(*r);
            }
            Point b = bisect_to_boundary(f, x, q, tol);
            double d = distance(x, b);
            if (d < best * (1.0 - 1e-14)) {
                stalled = best - d <= 1e-10 * best;
                p = std::move(b);
                best = d;
                improved = true;
            }
        }
        if (!improved || stalled) break;
    }
    return {p, best, true};
}

}  // namespace

AnchorSet find_anchors(const FunctionHandle& f, double member_tol, double radius,
                       const SamplerConfig& cfg, std::size_t cap) {
    const auto n = static_cast<std::size_t>(f.arity());
    Rng rng(derive_seed(cfg.seed, {0xA11C40ULL, key_of(radius), key_of(member_tol)}));
    std::vector<Point> starts;
    starts.emplace_back(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        Point e(n, 0.0);
        e[k] = 1.0;
        starts.push_back(e);
        e[k] = -1.0;
        starts.push_back(e);
    }
    const int per_scale = std::max(4, cfg.multistart_count / 2);
    for (double r = std::max(radius, 1.0); r >= 0.5; r /= 4.0) {
        for (int i = 0; i < per_scale; ++i) {
            Vec u = rng.unit_vector(n);
            double rad = r * rng.uniform();
            for (double& c : u) c *= rad;
            starts.push_back(std::move(u));
        }
    }

    std::vector<std::optional<Point>> found(starts.size());
    for (std::size_t i = 0; i < starts.size(); ++i) {
        if (feasible(f, starts[i], member_tol)) {
            found[i] = starts[i];
            continue;
        }
        found[i] = restore(f, starts[i], member_tol, cfg.max_iters);
    }

    std::vector<Point> anchors;
    for (auto& p : found) {
        if (!p) continue;
        bool dup = false;
        for (const auto& a : anchors)
            if (distance(a, *p) <= 1e-12 * (1.0 + norm(a))) dup = true;
        if (!dup) anchors.push_back(std::move(*p));
        if (anchors.size() >= cap) break;
    }
    return AnchorSet(std::move(anchors));
}

SublevelSet make_sublevel(const FunctionHandle& f, double member_tol, double radius,
                          const SamplerConfig& cfg) {
    auto anchors = std::make_shared<const AnchorSet>(find_anchors(f, member_tol, radius, cfg));
    return SublevelSet{f, member_tol, std::move(anchors)};
}

ProjectionResult distance_to_sublevel(const SublevelSet& s, std::span<const double> x,
                                      const SamplerConfig& cfg) {
    ProjectionResult out;
    const std::size_t n = x.size();
    if (member(s, x)) {
        out.projected.assign(x.begin(), x.end());
        out.dist = 0.0;
        out.converged = true;
        return out;
    }
    if (cfg.multistart_count <= 0) throw Error("multistart_count must be positive");

    std::vector<std::uint64_t> keys{0xD157ULL};
    for (double c : x) keys.push_back(key_of(c));
    std::uint64_t h = cfg.seed;
    for (auto k : keys) h = derive_seed(h, {k});
    Rng rng(h);

    const double w = cfg.box_half_width > 0.0 ? cfg.box_half_width : 8.0 * (1.0 + norm(x));
    std::vector<Point> starts;
    starts.emplace_back(x.begin(), x.end());
    for (int i = 1; i < cfg.multistart_count; ++i) {
        Point p(n);
        for (std::size_t j = 0; j < n; ++j) p[j] = x[j] + rng.uniform(-w, w);
        starts.push_back(std::move(p));
    }
    if (s.anchors && !s.anchors->empty())
        for (std::size_t idx : s.anchors->nearest_k(x, 3)) starts.push_back(s.anchors->points()[idx]);

    for (std::size_t i = 0; i < starts.size(); ++i) {
        StartResult r = project_from(s, x, starts[i], cfg, out.converged ? out.dist : std::numeric_limits<double>::infinity());
        ++out.starts_used;
        if (r.ok && (!out.converged || r.dist < out.dist)) {
            out.projected = std::move(r.projected);
            out.dist = r.dist;
            out.converged = true;
        }
    }
    if (!out.converged) {
        out.dist = std::numeric_limits<double>::infinity();
        out.projected.assign(x.begin(), x.end());
    }
    return out;
}

}  // namespace ebound
