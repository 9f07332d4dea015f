#include "ebound/fiber.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ebound/errors.hpp"
#include "ebound/local_search.hpp"
#include "ebound/parallel.hpp"
#include "ebound/random.hpp"

namespace ebound {

LevelGrid LevelGrid::geometric(double lo, double hi, std::size_t count, std::size_t near_count,
                               std::size_t far_count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) throw Error("geometric grid needs 0 < lo < hi and count >= 2");
    std::vector<double> levels(count);
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) levels[i] = lo * std::exp(step * static_cast<double>(i));
    levels.back() = hi;
    return from_levels(std::move(levels), near_count, far_count);
}

LevelGrid LevelGrid::from_levels(std::vector<double> levels, std::size_t near_count,
                                 std::size_t far_count) {
    if (levels.empty()) throw Error("level grid is empty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0) || !std::isfinite(levels[i])) throw Error("levels must be positive and finite");
        if (i > 0 && !(levels[i] > levels[i - 1])) throw Error("levels must be strictly increasing");
    }
    LevelGrid g;
    g.near_end = std::min(near_count, levels.size());
    g.far_begin = levels.size() - std::min(far_count, levels.size());
    g.far_end = levels.size();
    g.levels = std::move(levels);
    return g;
}

std::span<const double> LevelGrid::near() const {
    return std::span<const double>(levels).subspan(near_begin, near_end - near_begin);
}

std::span<const double> LevelGrid::far() const {
    return std::span<const double>(levels).subspan(far_begin, far_end - far_begin);
}

std::vector<double> geometric_radii(double r0, double factor, std::size_t count) {
    if (!(r0 > 0.0) || !(factor > 1.0) || count == 0) throw Error("radii need r0 > 0, factor > 1, count >= 1");
    std::vector<double> r(count);
    r[0] = r0;
    for (std::size_t i = 1; i < count; ++i) r[i] = r[i - 1] * factor;
    return r;
}

std::string_view trend_name(Trend t) {
    switch (t) {
        case Trend::converges_to_zero: return "converges_to_zero";
        case Trend::bounded: return "bounded";
        case Trend::diverges: return "diverges";
        case Trend::undetermined: return "undetermined";
    }
    return "?";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void add_unique(std::vector<Point>& pool, Point p) {
    for (const auto& q : pool)
        if (distance(p, q) <= 1e-12 * (1.0 + norm(q))) return;
    pool.push_back(std::move(p));
}

std::optional<double> slope_at(const FunctionHandle& f, std::span<const double> x) {
    try {
        double m = nonsmooth_slope(f, x);
        if (std::isfinite(m)) return m;
    } catch (const Error&) {
    }
    return std::nullopt;
}

// Roots of f - t along o + s u with |o + s u| <= radius: sign changes on a
// mixed geometric/uniform parameter grid, refined by bisection.
void scan_line(const FunctionHandle& f, double t, double radius, const Point& o, const Vec& u,
               double tol, std::vector<Point>& pool) {
    const std::size_t n = o.size();
    const double ou = dot(o, u);
    const double disc = ou * ou - dot(o, o) + radius * radius;
    if (disc <= 0.0) return;
    const double s_lo = -ou - std::sqrt(disc), s_hi = -ou + std::sqrt(disc);
    const double s0 = std::clamp(-ou, s_lo, s_hi);

    std::vector<double> ss;
    const int geo = 120, uni = 160;
    for (int i = 0; i < geo; ++i) {
        double a = radius * std::pow(10.0, -9.0 + 9.5 * i / (geo - 1));
        ss.push_back(s0 + a);
        ss.push_back(s0 - a);
    }
    for (int i = 0; i <= uni; ++i) ss.push_back(s_lo + (s_hi - s_lo) * i / uni);
    ss.push_back(s0);
    for (double& s : ss) s = std::clamp(s, s_lo, s_hi);
    std::sort(ss.begin(), ss.end());
    ss.erase(std::unique(ss.begin(), ss.end()), ss.end());

    Point p(n);
    auto g_at = [&](double s) -> std::optional<double> {
        for (std::size_t j = 0; j < n; ++j) p[j] = o[j] + s * u[j];
        auto v = try_evaluate(f, p);
        if (!v) return std::nullopt;
        return *v - t;
    };
    auto point_at = [&](double s) {
        Point q(n);
        for (std::size_t j = 0; j < n; ++j) q[j] = o[j] + s * u[j];
        return q;
    };

    std::optional<double> prev;
    double prev_s = 0.0;
    for (double s : ss) {
        auto g = g_at(s);
        if (g && std::fabs(*g) <= tol) add_unique(pool, point_at(s));
        if (g && prev && ((*prev < 0.0 && *g > 0.0) || (*prev > 0.0 && *g < 0.0))) {
            double a = prev_s, b = s, ga = *prev;
            bool broken = false;
            for (int it = 0; it < 200; ++it) {
                double m = 0.5 * (a + b);
                if (m <= a || m >= b) break;
                auto gm = g_at(m);
                if (!gm) {
                    broken = true;
                    break;
                }
                if (*gm == 0.0) {
                    a = b = m;
                    break;
                }
                if ((*gm < 0.0) == (ga < 0.0)) {
                    a = m;
                    ga = *gm;
                } else {
                    b = m;
                }
            }
            if (!broken) {
                // Keep whichever end is closer to the level; at double
                // resolution this is the root to machine precision.
                auto ea = g_at(a), eb = g_at(b);
                if (ea && eb) add_unique(pool, point_at(std::fabs(*ea) <= std::fabs(*eb) ? a : b));
            }
        }
        prev = g;
        prev_s = s;
    }
}

}  // namespace

std::vector<Point> sample_fiber(const FunctionHandle& f, double t, double radius, std::uint64_t seed,
                                const FiberConfig& cfg) {
    const auto n = static_cast<std::size_t>(f.arity());
    const double tol = cfg.level_rel_tol * std::max(std::fabs(t), 1e-300);
    Rng rng(seed);
    std::vector<Point> pool;

    const std::size_t lines = cfg.line_count > 0 ? static_cast<std::size_t>(cfg.line_count) : 2 * n + 8;
    const Point origin(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        Vec e(n, 0.0);
        e[k] = 1.0;
        scan_line(f, t, radius, origin, e, tol, pool);
    }
    for (std::size_t i = n; i < lines; ++i) scan_line(f, t, radius, origin, rng.unit_vector(n), tol, pool);
    // Axis-parallel lines through offsets at log-uniform distances, which
    // reach fibers hugging a coordinate axis.
    if (n >= 2) {
        for (std::size_t k = 0; k < n; ++k) {
            for (int rep = 0; rep < 4; ++rep) {
                Vec off = rng.unit_vector(n);
                off[k] = 0.0;
                double on = norm(off);
                if (on == 0.0) continue;
                double scale = radius * std::pow(10.0, -6.0 * rng.uniform()) / on;
                for (double& c : off) c *= scale;
                Vec e(n, 0.0);
                e[k] = 1.0;
                scan_line(f, t, radius, off, e, tol, pool);
            }
        }
    }

    LevelSolveOptions opts;
    opts.ball_radius = radius;
    for (int i = 0; i < cfg.newton_starts; ++i) {
        Vec y = rng.unit_vector(n);
        double r = radius * std::pow(10.0, -4.0 * rng.uniform());
        for (double& c : y) c *= r;
        auto z = solve_level(f, y, t, [&](double v) { return std::fabs(v - t) <= tol; }, opts);
        if (z && norm(*z) <= radius) add_unique(pool, std::move(*z));
    }
    return pool;
}

namespace {

struct CellResult {
    std::optional<double> mu, phi;
    Point mu_at, phi_at;
    int hits = 0;
};

// Indices of up to `k` entries: half by largest `primary`, the rest by
// largest `secondary`, without repeats.
std::vector<std::size_t> pick(const std::vector<double>& primary, const std::vector<double>& secondary,
                              std::size_t k) {
    const std::size_t m = primary.size();
    std::vector<std::size_t> a(m), b(m);
    for (std::size_t i = 0; i < m; ++i) a[i] = b[i] = i;
    std::stable_sort(a.begin(), a.end(), [&](auto i, auto j) { return primary[i] > primary[j]; });
    std::stable_sort(b.begin(), b.end(), [&](auto i, auto j) { return secondary[i] > secondary[j]; });
    std::vector<std::size_t> out;
    std::vector<bool> taken(m, false);
    auto take = [&](const std::vector<std::size_t>& order, std::size_t limit) {
        for (std::size_t i : order) {
            if (out.size() >= limit) return;
            if (!taken[i]) {
                taken[i] = true;
                out.push_back(i);
            }
        }
    };
    take(a, std::min(m, (k + 1) / 2));
    take(b, std::min(m, k));
    return out;
}

// Pattern search for small m_f along {f = level}, stepping in directions
// orthogonal to the descent direction and correcting back to the level.
std::pair<Point, double> tangent_descent(const FunctionHandle& f, Point p, double m, double level,
                                         double radius, double tol, Rng& rng, int iters) {
    const std::size_t n = p.size();
    if (n < 2) return {p, m};
    double h = 0.05 * (1.0 + norm(p));
    LevelSolveOptions opts;
    opts.ball_radius = radius;
    opts.max_iters = 60;
    for (int it = 0; it < iters && h > 1e-12 * (1.0 + norm(p)); ++it) {
        auto g = descent_direction(f, p);
        if (!g) break;
        Vec d = rng.unit_vector(n);
        double gg = dot(*g, *g);
        if (gg > 0.0) {
            double c = dot(d, *g) / gg;
            for (std::size_t j = 0; j < n; ++j) d[j] -= c * (*g)[j];
        }
        double dn = norm(d);
        if (!(dn > 0.0)) break;
        bool improved = false;
        for (double sign : {1.0, -1.0}) {
            Point q(n);
            for (std::size_t j = 0; j < n; ++j) q[j] = p[j] + sign * h * d[j] / dn;
            auto z = solve_level(f, q, level, [&](double v) { return std::fabs(v - level) <= tol; }, opts);
            if (!z || norm(*z) > radius) continue;
            auto mz = slope_at(f, *z);
            if (mz && *mz < m) {
                p = std::move(*z);
                m = *mz;
                improved = true;
                break;
            }
        }
        h = improved ? 2.0 * h : 0.5 * h;
    }
    return {p, m};
}

// Walks along {f = level} in the direction of v projected on the tangent
// space, as far as v . x keeps increasing. Ends near points where the fiber
// turns back, which is where asymptotically flat stretches show up.
Point sweep(const FunctionHandle& f, Point p, const Vec& v, double level, double radius, double tol,
            int steps) {
    const std::size_t n = p.size();
    double h = 0.01 * (1.0 + norm(p));
    LevelSolveOptions opts;
    opts.ball_radius = radius;
    opts.max_iters = 40;
    for (int it = 0; it < steps && h > 1e-13 * (1.0 + norm(p)); ++it) {
        auto g = descent_direction(f, p);
        if (!g) break;
        Vec d = v;
        double gg = dot(*g, *g);
        if (gg > 0.0) {
            double c = dot(d, *g) / gg;
            for (std::size_t j = 0; j < n; ++j) d[j] -= c * (*g)[j];
        }
        double dn = norm(d);
        if (!(dn > 1e-12)) break;
        Point q(n);
        for (std::size_t j = 0; j < n; ++j) q[j] = p[j] + h * d[j] / dn;
        auto z = solve_level(f, q, level, [&](double val) { return std::fabs(val - level) <= tol; }, opts);
        if (z && norm(*z) <= radius && dot(v, *z) > dot(v, p)) {
            p = std::move(*z);
            h *= 2.0;
        } else {
            h *= 0.5;
        }
    }
    return p;
}

CellResult compute_cell(const SublevelSet* s, const FunctionHandle& f, double t, double radius,
                        std::uint64_t seed, bool want_mu, bool want_phi, const FiberConfig& cfg) {
    CellResult out;
    std::vector<Point> pool = sample_fiber(f, t, radius, derive_seed(seed, {1}), cfg);
    out.hits = static_cast<int>(pool.size());

    if (want_mu && !pool.empty()) {
        std::vector<double> prescore(pool.size()), size(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            size[i] = norm(pool[i]);
            prescore[i] = s->anchors && !s->anchors->empty() ? s->anchors->nearest(pool[i]).second : size[i];
        }
        SamplerConfig sc = cfg.sampler;
        for (std::size_t i : pick(prescore, size, static_cast<std::size_t>(cfg.distance_candidates))) {
            auto r = distance_to_sublevel(*s, pool[i], sc);
            if (!r.converged) continue;
            if (!out.mu || r.dist > *out.mu) {
                out.mu = r.dist;
                out.mu_at = pool[i];
            }
        }
    }

    if (want_phi) {
        std::vector<std::pair<Point, double>> both;
        for (auto& p : pool) both.emplace_back(std::move(p), t);
        for (auto& p : sample_fiber(f, -t, radius, derive_seed(seed, {2}), cfg)) both.emplace_back(std::move(p), -t);

        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t i = 0; i < both.size(); ++i)
            if (auto m = slope_at(f, both[i].first)) ranked.emplace_back(*m, i);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        ranked.resize(std::min(ranked.size(), static_cast<std::size_t>(cfg.slope_candidates)));
        Rng rng(derive_seed(seed, {3}));
        auto consider = [&](Point p, double m, double level) {
            const double tol = cfg.level_rel_tol * std::fabs(level);
            auto [q, mm] = tangent_descent(f, std::move(p), m, level, radius, tol, rng, cfg.tangent_iters);
            if (!out.phi || mm < *out.phi) {
                out.phi = mm;
                out.phi_at = std::move(q);
            }
        };
        for (const auto& [m, i] : ranked) consider(both[i].first, m, both[i].second);

        // Coordinate sweeps from the flattest and the outermost fiber point.
        const auto n = static_cast<std::size_t>(f.arity());
        if (n >= 2 && !ranked.empty() && cfg.sweep_steps > 0) {
            std::size_t outer = 0;
            for (std::size_t i = 1; i < both.size(); ++i)
                if (norm(both[i].first) > norm(both[outer].first)) outer = i;
            for (std::size_t i : {ranked.front().second, outer}) {
                const double level = both[i].second;
                const double tol = cfg.level_rel_tol * std::fabs(level);
                for (std::size_t k = 0; k < n; ++k) {
                    for (double sign : {1.0, -1.0}) {
                        Vec v(n, 0.0);
                        v[k] = sign;
                        Point end = sweep(f, both[i].first, v, level, radius, tol, cfg.sweep_steps);
                        if (auto m = slope_at(f, end)) consider(std::move(end), *m, level);
                    }
                }
            }
        }
    }
    return out;
}

void check_radii(std::span<const double> radii) {
    if (radii.empty()) throw Error("radius schedule is empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) throw Error("radii must be positive");
        if (i > 0 && !(radii[i] > radii[i - 1])) throw Error("radii must be increasing");
    }
}

FiberProfile build_profile(const SublevelSet* s, const FunctionHandle& f, const LevelGrid& grid,
                           std::span<const double> radii, bool want_mu, bool want_phi,
                           const FiberConfig& cfg) {
    check_radii(radii);
    const std::size_t L = grid.levels.size(), R = radii.size();
    std::vector<CellResult> cells(L * R);
    parallel_for(cells.size(), cfg.sampler.threads, [&](std::size_t idx) {
        std::size_t r = idx / L, l = idx % L;
        std::uint64_t seed = derive_seed(cfg.sampler.seed, {0xF1BE4ULL, l, r});
        cells[idx] = compute_cell(s, f, grid.levels[l], radii[r], seed, want_mu, want_phi, cfg);
    });

    FiberProfile p;
    p.grid = grid;
    p.radii.assign(radii.begin(), radii.end());
    p.mu.assign(R, std::vector<std::optional<double>>(L));
    p.phi = p.mu;
    p.fiber_hits.assign(R, std::vector<int>(L, 0));
    p.mu_witness.assign(R, std::vector<Point>(L));
    p.phi_witness = p.mu_witness;
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t l = 0; l < L; ++l) {
            CellResult& c = cells[r * L + l];
            p.fiber_hits[r][l] = c.hits;
            if (r > 0) {
                p.mu[r][l] = p.mu[r - 1][l];
                p.mu_witness[r][l] = p.mu_witness[r - 1][l];
                p.phi[r][l] = p.phi[r - 1][l];
                p.phi_witness[r][l] = p.phi_witness[r - 1][l];
            }
            if (c.mu && (!p.mu[r][l] || *c.mu > *p.mu[r][l])) {
                p.mu[r][l] = c.mu;
                p.mu_witness[r][l] = std::move(c.mu_at);
            }
            if (c.phi && (!p.phi[r][l] || *c.phi < *p.phi[r][l])) {
                p.phi[r][l] = c.phi;
                p.phi_witness[r][l] = std::move(c.phi_at);
            }
        }
    }
    return p;
}

}  // namespace

FiberProfile fiber_profile(const SublevelSet& s, const LevelGrid& grid, std::span<const double> radii,
                           const FiberConfig& cfg) {
    return build_profile(&s, s.f, grid, radii, true, true, cfg);
}

FiberProfile mu_profile(const SublevelSet& s, const LevelGrid& grid, std::span<const double> radii,
                        const FiberConfig& cfg) {
    return build_profile(&s, s.f, grid, radii, true, false, cfg);
}

FiberProfile phi_profile(const FunctionHandle& f, const LevelGrid& grid, std::span<const double> radii,
                         const FiberConfig& cfg) {
    return build_profile(nullptr, f, grid, radii, false, true, cfg);
}

namespace {

// First run of at least three consecutive present values each growing by
// `factor`, extended while growth continues. Returns [begin, end) indices.
std::optional<std::pair<std::size_t, std::size_t>> growth_run(const std::vector<std::optional<double>>& v,
                                                              double factor) {
    auto grows = [&](std::size_t i) {
        return v[i] && v[i + 1] && *v[i] > 0.0 && *v[i + 1] >= factor * *v[i];
    };
    for (std::size_t j = 0; j + 2 < v.size(); ++j) {
        if (grows(j) && grows(j + 1)) {
            std::size_t end = j + 3;
            while (end < v.size() && grows(end - 1)) ++end;
            return std::make_pair(j, end);
        }
    }
    return std::nullopt;
}

}  // namespace

TrendVerdict classify_near(const FiberProfile& p, const FiberConfig& cfg) {
    TrendVerdict v;
    const LevelGrid& g = p.grid;
    const std::size_t R = p.radii.size();
    if (R == 0 || g.near_end <= g.near_begin) {
        v.note = "empty near window";
        return v;
    }
    std::vector<std::size_t> arg(R, 0);
    v.evidence.assign(R, std::nullopt);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t l = g.near_begin; l < g.near_end; ++l) {
            const auto& m = p.mu[r][l];
            if (m && (!v.evidence[r] || *m > *v.evidence[r])) {
                v.evidence[r] = m;
                arg[r] = l;
            }
        }
    }

    std::size_t hit = 0;
    for (std::size_t l = g.near_begin; l < g.near_end; ++l)
        if (p.mu[R - 1][l]) ++hit;
    const double frac = static_cast<double>(hit) / static_cast<double>(g.near_end - g.near_begin);
    if (frac < cfg.min_hit_fraction) {
        v.note = "too few near-zero fiber cells hit";
        return v;
    }

    if (auto run = growth_run(v.evidence, cfg.divergence_factor)) {
        v.kind = Trend::diverges;
        for (std::size_t r = run->first; r < run->second; ++r)
            v.witness.push_back({p.mu_witness[r][arg[r]], g.levels[arg[r]], *v.evidence[r], p.radii[r]});
        return v;
    }

    std::optional<double> smallest;
    for (std::size_t l = g.near_begin; l < g.near_end && !smallest; ++l) smallest = p.mu[R - 1][l];
    bool late_growth = R >= 2 && v.evidence[R - 1] && v.evidence[R - 2] &&
                       *v.evidence[R - 1] >= cfg.divergence_factor * *v.evidence[R - 2];
    if (smallest && *smallest <= cfg.zero_band && !late_growth) v.kind = Trend::converges_to_zero;
    else v.kind = Trend::bounded;
    return v;
}

TrendVerdict classify_far(const FiberProfile& p, const SublevelSet& s, const FiberConfig& cfg) {
    TrendVerdict v;
    const LevelGrid& g = p.grid;
    const std::size_t R = p.radii.size();
    if (R == 0) {
        v.note = "no radii";
        return v;
    }
    const double t_max = cfg.t_max > 0.0 ? cfg.t_max
                         : g.far_end > g.far_begin ? g.levels[g.far_begin]
                                                   : g.levels.back();
    const auto n = static_cast<std::size_t>(s.f.arity());

    struct Best {
        std::optional<double> d;
        Point x;
        double fx = 0.0;
    };
    std::vector<Best> best(R);
    parallel_for(R, cfg.sampler.threads, [&](std::size_t r) {
        const double radius = p.radii[r];
        Rng rng(derive_seed(cfg.sampler.seed, {0xE5CA9EULL, r}));
        std::vector<Point> pool;
        LevelSolveOptions opts;
        opts.ball_radius = radius;
        for (int i = 0; i < cfg.escape_starts; ++i) {
            Vec y = rng.unit_vector(n);
            double rad = radius * (i % 2 == 0 ? 1.0 : 0.5 + 0.5 * rng.uniform());
            for (double& c : y) c *= rad;
            auto fy = try_evaluate(s.f, y);
            if (!fy) continue;
            if (*fy <= t_max) {
                add_unique(pool, std::move(y));
                continue;
            }
            if (auto z = solve_level(s.f, y, t_max, [&](double val) { return val <= t_max; }, opts))
                add_unique(pool, std::move(*z));
        }
        for (std::size_t l = 0; l < g.levels.size(); ++l)
            if (g.levels[l] <= t_max && !p.mu_witness[r][l].empty()) add_unique(pool, p.mu_witness[r][l]);

        std::vector<Point> outside;
        for (auto& q : pool)
            if (norm(q) <= radius && !member(s, q)) outside.push_back(std::move(q));
        std::vector<double> prescore(outside.size()), size(outside.size());
        for (std::size_t i = 0; i < outside.size(); ++i) {
            size[i] = norm(outside[i]);
            prescore[i] = s.anchors && !s.anchors->empty() ? s.anchors->nearest(outside[i]).second : size[i];
        }
        for (std::size_t i : pick(prescore, size, static_cast<std::size_t>(cfg.distance_candidates))) {
            auto res = distance_to_sublevel(s, outside[i], cfg.sampler);
            if (!res.converged) continue;
            if (!best[r].d || res.dist > *best[r].d) {
                best[r].d = res.dist;
                best[r].x = outside[i];
                best[r].fx = evaluate(s.f, outside[i]);
            }
        }
    });
    for (std::size_t r = 1; r < R; ++r)
        if (best[r - 1].d && (!best[r].d || *best[r - 1].d > *best[r].d)) best[r] = best[r - 1];

    v.evidence.resize(R);
    for (std::size_t r = 0; r < R; ++r) v.evidence[r] = best[r].d;
    if (auto run = growth_run(v.evidence, cfg.divergence_factor)) {
        v.kind = Trend::diverges;
        for (std::size_t r = run->first; r < run->second; ++r)
            v.witness.push_back({best[r].x, best[r].fx, *best[r].d, p.radii[r]});
        return v;
    }
    bool any = std::any_of(best.begin(), best.end(), [](const Best& b) { return b.d.has_value(); });
    v.kind = any ? Trend::bounded : Trend::undetermined;
    if (!any) v.note = "escape search found no points";
    return v;
}

ExponentFit fit_exponent(const FiberProfile& p, ProfileKind which, const FiberConfig& cfg) {
    const auto& m = which == ProfileKind::mu_near_zero ? p.mu : p.phi;
    const std::size_t R = p.radii.size();
    if (R == 0) throw FitError(FitError::Kind::bad_input, "profile has no radii");
    const LevelGrid& g = p.grid;
    std::vector<double> xs, ys;
    for (std::size_t l = g.near_begin; l < g.near_end; ++l) {
        const auto& last = m[R - 1][l];
        if (!last || !(*last > 0.0)) continue;
        if (R >= 2) {
            const auto& prev = m[R - 2][l];
            if (!prev || std::fabs(*last - *prev) > cfg.radius_stability * std::fabs(*last))
                throw FitError(FitError::Kind::not_radius_stable,
                               "profile moves by more than the stability margin between the two largest radii");
        }
        xs.push_back(std::log(g.levels[l]));
        ys.push_back(std::log(*last));
    }
    if (xs.size() < cfg.min_fit_levels)
        throw FitError(FitError::Kind::degenerate_window, "fewer usable levels than required for a fit");

    const double k = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    ExponentFit fit;
    fit.q = sxy / sxx;
    fit.c = std::exp(my - fit.q * mx);
    fit.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    fit.t_lo = std::exp(xs.front());
    fit.t_hi = std::exp(xs.back());
    fit.used = xs.size();
    return fit;
}

namespace {

void put(std::string& out, double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

}  // namespace

std::string profile_csv(const FiberProfile& p) {
    std::string out = "level,radius,mu,phi,fiber_hits\n";
    for (std::size_t r = 0; r < p.radii.size(); ++r) {
        for (std::size_t l = 0; l < p.grid.levels.size(); ++l) {
            put(out, p.grid.levels[l]);
            out += ',';
            put(out, p.radii[r]);
            out += ',';
            if (p.mu[r][l]) put(out, *p.mu[r][l]);
            out += ',';
            if (p.phi[r][l]) put(out, *p.phi[r][l]);
            out += ',';
            out += std::to_string(p.fiber_hits[r][l]);
            out += '\n';
        }
    }
    return out;
}

}  // namespace ebound
