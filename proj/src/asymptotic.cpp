#include "ebound/asymptotic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <Eigen/Dense>

#include "ebound/errors.hpp"
#include "ebound/local_search.hpp"
#include "ebound/parallel.hpp"
#include "ebound/random.hpp"

namespace ebound {

std::vector<double> default_kinf_levels() {
    std::vector<double> v;
    for (int i = 0; i <= 20; ++i) v.push_back(static_cast<double>(i - 10) / 5.0);
    return v;
}

std::vector<double> default_kinf_radii() {
    std::vector<double> r;
    double R = 4.0;
    for (int j = 1; j <= 13; ++j, R *= 4.0) r.push_back(R);
    return r;
}

std::string_view ps_status_name(PSStatus s) {
    switch (s) {
        case PSStatus::holds: return "holds";
        case PSStatus::fails: return "fails";
        case PSStatus::undetermined: return "undetermined";
    }
    return "?";
}

namespace {

struct Slab {
    const FunctionHandle& f;
    double t, eps, r_lo, r_hi;

    bool inside(std::span<const double> p) const {
        double r = norm(p);
        if (r < r_lo || r > r_hi) return false;
        auto v = try_evaluate(f, p);
        return v && std::fabs(*v - t) <= eps;
    }

    // Pulls p into the slab along the gradient; empty if that fails or the
    // result leaves the annulus.
    std::optional<Point> settle(Point p) const {
        auto v = try_evaluate(f, p);
        if (!v) return std::nullopt;
        if (std::fabs(*v - t) > eps) {
            LevelSolveOptions opts;
            opts.ball_radius = r_hi;
            opts.max_iters = 60;
            auto z = solve_level(f, std::move(p), t, [&](double val) { return std::fabs(val - t) <= 0.5 * eps; }, opts);
            if (!z) return std::nullopt;
            p = std::move(*z);
        }
        if (!inside(p)) return std::nullopt;
        return p;
    }
};

double sq_norm(const Vec& v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return s;
}

// Levenberg-Marquardt on the residual r(p) = descent direction, with the
// Jacobian from central differences of r and every trial settled back into
// the slab.
Point minimize_slope(const Slab& slab, Point p, int iters) {
    const std::size_t n = p.size();
    const auto N = static_cast<Eigen::Index>(n);
    auto r0 = descent_direction(slab.f, p);
    if (!r0) return p;
    Vec r = *r0;
    double cost = sq_norm(r);
    double lambda = 1e-3;
    Eigen::MatrixXd J(N, N);
    for (int it = 0; it < iters && cost > 0.0 && lambda < 1e12; ++it) {
        const double pn = norm(p);
        bool ok = true;
        for (std::size_t j = 0; j < n && ok; ++j) {
            const double h = 1e-7 * (std::fabs(p[j]) + 1e-8 * pn + 1e-12);
            Point a = p, b = p;
            a[j] += h;
            b[j] -= h;
            auto ra = descent_direction(slab.f, a), rb = descent_direction(slab.f, b);
            if (!ra || !rb) {
                ok = false;
                break;
            }
            for (std::size_t i = 0; i < n; ++i)
                J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ((*ra)[i] - (*rb)[i]) / (2.0 * h);
        }
        if (!ok) break;
        Eigen::VectorXd rv = Eigen::Map<const Eigen::VectorXd>(r.data(), N);
        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * rv;

        bool accepted = false;
        while (!accepted && lambda < 1e12) {
            Eigen::MatrixXd A = JtJ;
            for (Eigen::Index i = 0; i < N; ++i) A(i, i) += lambda * (JtJ(i, i) + 1e-300);
            Eigen::VectorXd step = A.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            Point q(n);
            for (std::size_t j = 0; j < n; ++j) q[j] = p[j] + step(static_cast<Eigen::Index>(j));
            auto z = slab.settle(std::move(q));
            if (z) {
                auto rz = descent_direction(slab.f, *z);
                if (rz && sq_norm(*rz) < cost) {
                    p = std::move(*z);
                    r = std::move(*rz);
                    cost = sq_norm(r);
                    lambda = std::max(lambda / 3.0, 1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if (!accepted) break;
    }
    return p;
}

std::optional<double> slope_at(const FunctionHandle& f, std::span<const double> x) {
    try {
        double m = nonsmooth_slope(f, x);
        if (std::isfinite(m)) return m;
    } catch (const Error&) {
    }
    return std::nullopt;
}

DecayCell scan_cell(const FunctionHandle& f, double t, double eps, double radius, std::uint64_t seed,
                    const KinfConfig& cfg) {
    const auto n = static_cast<std::size_t>(f.arity());
    Slab slab{f, t, eps, radius, 2.0 * radius};
    Rng rng(seed);
    DecayCell cell;
    cell.radius = radius;
    for (int i = 0; i < cfg.starts; ++i) {
        Vec y = rng.unit_vector(n);
        const double rad = radius * (1.0 + rng.uniform());
        for (double& c : y) c *= rad;
        auto p = slab.settle(std::move(y));
        if (!p) continue;
        Point q = minimize_slope(slab, std::move(*p), cfg.lm_iters);
        auto m = slope_at(f, q);
        // Strict comparison keeps the earliest start on ties.
        if (m && (!cell.s || *m < *cell.s)) {
            cell.s = m;
            cell.at = std::move(q);
        }
    }
    return cell;
}

LevelScan scan_level(const FunctionHandle& f, double t, std::span<const double> radii, const KinfConfig& cfg) {
    LevelScan scan;
    scan.level = t;
    scan.eps = cfg.eps_rel * std::max(1.0, std::fabs(t));
    scan.cells.resize(radii.size());
    parallel_for(radii.size(), cfg.sampler.threads, [&](std::size_t j) {
        std::uint64_t seed = derive_seed(cfg.sampler.seed, {0xA5E7ULL, key_of(t), static_cast<std::uint64_t>(j)});
        scan.cells[j] = scan_cell(f, t, scan.eps, radii[j], seed, cfg);
    });

    std::size_t filled = 0;
    for (const auto& c : scan.cells)
        if (c.s) ++filled;
    scan.undetermined = 2 * filled < scan.cells.size();

    auto shrinks = [&](std::size_t j) {
        const auto &a = scan.cells[j].s, &b = scan.cells[j + 1].s;
        return a && b && *b * cfg.decay_factor <= *a;
    };
    for (std::size_t j = 0; j + 2 < scan.cells.size(); ++j) {
        if (!shrinks(j) || !shrinks(j + 1)) continue;
        std::size_t end = j + 3;
        while (end < scan.cells.size() && shrinks(end - 1)) ++end;
        if (*scan.cells[end - 1].s < cfg.zero_band) {
            scan.flagged = true;
            scan.witness.assign(scan.cells.begin() + static_cast<std::ptrdiff_t>(j),
                                scan.cells.begin() + static_cast<std::ptrdiff_t>(end));
            break;
        }
        j = end - 2;
    }
    return scan;
}

void check_radii(std::span<const double> radii) {
    if (radii.empty()) throw Error("radius schedule is empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) throw Error("radii must be positive");
        if (i > 0 && !(radii[i] > radii[i - 1])) throw Error("radii must be increasing");
    }
}

}  // namespace

CriticalValueReport detect_kinf(const FunctionHandle& f, std::span<const double> levels,
                                std::span<const double> radii, const KinfConfig& cfg) {
    check_radii(radii);
    for (double t : levels)
        if (!std::isfinite(t)) throw Error("levels must be finite");
    CriticalValueReport rep;
    for (double t : levels) {
        rep.levels.push_back(scan_level(f, t, radii, cfg));
        if (rep.levels.back().flagged) rep.flagged.push_back(t);
    }
    if (!levels.empty() &&
        static_cast<double>(rep.flagged.size()) > cfg.dense_fraction * static_cast<double>(levels.size()))
        rep.warnings.push_back("kinf_dense");
    return rep;
}

PSVerdict palais_smale_from_scan(const FunctionHandle& f, const LevelScan& scan, const KinfConfig& cfg) {
    PSVerdict v;
    v.level = scan.level;
    if (scan.flagged) {
        v.status = PSStatus::fails;
        v.witness = scan.witness;
        v.note = "unbounded sequence with f -> t and m_f -> 0";
        return v;
    }

    // Slab points inside the innermost ball, for the report.
    if (!scan.cells.empty()) {
        const auto n = static_cast<std::size_t>(f.arity());
        const double r0 = scan.cells.front().radius;
        Slab inner{f, scan.level, scan.eps, 0.0, r0};
        Rng rng(derive_seed(cfg.sampler.seed, {0x1EEAULL, key_of(scan.level)}));
        for (int i = 0; i < cfg.starts; ++i) {
            Vec y = rng.unit_vector(n);
            const double rad = r0 * rng.uniform();
            for (double& c : y) c *= rad;
            auto p = inner.settle(std::move(y));
            if (!p) continue;
            Point q = minimize_slope(inner, std::move(*p), cfg.lm_iters);
            auto m = slope_at(f, q);
            if (m && (!v.inner_min_slope || *m < *v.inner_min_slope)) v.inner_min_slope = m;
        }
    }

    for (const auto& c : scan.cells) {
        if (c.s && *c.s < cfg.ps_floor) {
            v.status = PSStatus::undetermined;
            v.note = "small slopes far out without a clean decay";
            return v;
        }
    }
    v.status = PSStatus::holds;
    v.note = "near-critical slab points stay inside the innermost ball";
    return v;
}

PSVerdict check_palais_smale(const FunctionHandle& f, double t, std::span<const double> radii,
                             const KinfConfig& cfg) {
    check_radii(radii);
    if (!std::isfinite(t)) throw Error("level must be finite");
    return palais_smale_from_scan(f, scan_level(f, t, radii, cfg), cfg);
}

namespace {

void put(std::string& out, double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

}  // namespace

std::string decay_csv(const CriticalValueReport& report) {
    std::string out = "level,radius,s\n";
    for (const auto& l : report.levels) {
        for (const auto& c : l.cells) {
            put(out, l.level);
            out += ',';
            put(out, c.radius);
            out += ',';
            if (c.s) put(out, *c.s);
            out += '\n';
        }
    }
    return out;
}

}  // namespace ebound
