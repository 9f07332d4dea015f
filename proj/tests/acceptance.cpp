// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here, not read from any config.

#include <cfloat>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "ebound/asymptotic.hpp"
#include "ebound/errorbound.hpp"
#include "ebound/errors.hpp"
#include "ebound/fiber.hpp"
#include "ebound/pipeline.hpp"
#include "ebound/random.hpp"
#include "oracles.hpp"
#include "random_functions.hpp"

using namespace ebound;

namespace {

const Expr x = var(0);
const Expr y = var(1);

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

SublevelSet sublevel(const Expr& e, int n, double radius, const SamplerConfig& sc, double tol) {
    return make_sublevel(FunctionHandle(e, n, "f"), tol, radius, sc);
}

Outcome mu_oracle() {
    FiberConfig cfg;
    cfg.sampler.threads = 1;
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> levels{0.05, 0.1, 0.2};
    auto grid = LevelGrid::from_levels(levels, 3, 0);
    auto radii = geometric_radii(4, 4, 8);
    auto s = sublevel(x / (1.0 + x * x), 1, radii.back(), cfg.sampler, cfg.member_tol);
    auto p = mu_profile(s, grid, radii, cfg);
    double secs = seconds_since(t0);
    double worst = 0.0;
    bool all = true;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const double t = levels[l];
        const double oracle = (1.0 + std::sqrt(1.0 - 4.0 * t * t)) / (2.0 * t);
        const auto& got = p.mu.back()[l];
        if (!got) {
            all = false;
            continue;
        }
        worst = std::max(worst, std::fabs(*got - oracle) / oracle);
    }
    return {all && worst <= 0.01 && secs < 30.0,
            fmt("worst rel err %.2e", worst) + fmt(", %.1f s single-threaded", secs)};
}

Outcome near_verdicts() {
    FiberConfig cfg;
    auto grid = LevelGrid::geometric(1e-4, 1e2, 24);
    auto radii = geometric_radii(4, 4, 8);
    auto run = [&](const Expr& e) {
        auto s = sublevel(e, 1, radii.back(), cfg.sampler, cfg.member_tol);
        return classify_near(mu_profile(s, grid, radii, cfg), cfg).kind;
    };
    Trend a = run(x / (1.0 + x * x)), b = run(x * x);
    return {a == Trend::diverges && b == Trend::converges_to_zero,
            "x/(1+x^2): " + std::string(trend_name(a)) + ", x^2: " + std::string(trend_name(b))};
}

Outcome far_verdict() {
    FiberConfig cfg;
    auto grid = LevelGrid::geometric(1e-4, 1e2, 24);
    auto radii = geometric_radii(4, 4, 8);
    auto s = sublevel(x / sqrt(1.0 + x * x), 1, radii.back(), cfg.sampler, cfg.member_tol);
    auto v = classify_far(mu_profile(s, grid, radii, cfg), s, cfg);
    bool ok = v.kind == Trend::diverges && !v.witness.empty();
    double d = 0.0, fmax = -INFINITY;
    for (const auto& w : v.witness) {
        d = std::max(d, w.d);
        fmax = std::max(fmax, w.f);
    }
    ok = ok && d >= 100.0 && fmax <= 1.0;
    return {ok, std::string(trend_name(v.kind)) + fmt(", witness d = %.4g", d) + fmt(", max f = %.6f", fmax)};
}

Outcome kinf_detection() {
    KinfConfig cfg;
    auto radii = default_kinf_radii();
    auto t0 = std::chrono::steady_clock::now();
    FunctionHandle ha(powi(x * y - 1.0, 2) + powi(x - 1.0, 2), 2, "ha");
    std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    auto rep = detect_kinf(ha, levels, radii, cfg);
    bool flags_ok = rep.levels[4].flagged && !rep.levels[1].flagged && !rep.levels[2].flagged && !rep.levels[3].flagged;

    // Decay cells inside the asymptotic regime, and above the rounding floor
    // of the x-partial (about 2 eps |y|), against 2(k^2-1)/(1+k^2)^2.
    int compared = 0;
    double worst = 0.0;
    for (const auto& c : rep.levels[4].witness) {
        const double k = c.at[1];
        const double expected = 2.0 * (k * k - 1.0) / ((1.0 + k * k) * (1.0 + k * k));
        if (!c.s || *c.s >= cfg.zero_band || expected < 2.0 * DBL_EPSILON * std::fabs(k)) continue;
        worst = std::max(worst, std::fabs(*c.s - expected) / expected);
        ++compared;
    }

    FunctionHandle g(x / (1.0 + y * y), 2, "g");
    auto grid = default_kinf_levels();
    auto rep2 = detect_kinf(g, grid, radii, cfg);
    double secs = seconds_since(t0);
    bool dense = rep2.flagged.size() * 10 >= grid.size() * 9;
    std::ostringstream os;
    os << "ha flagged {";
    for (std::size_t i = 0; i < rep.flagged.size(); ++i) os << (i ? "," : "") << rep.flagged[i];
    os << "}, decay worst rel err " << fmt("%.2e", worst) << " over " << compared << " cells; x/(1+y^2) "
       << rep2.flagged.size() << "/" << grid.size() << " flagged; " << fmt("%.1f s", secs);
    return {flags_ok && compared >= 3 && worst <= 0.1 && dense && secs < 120.0, os.str()};
}

Outcome palais_smale() {
    KinfConfig cfg;
    auto radii = default_kinf_radii();
    auto a = check_palais_smale(FunctionHandle(x / (1.0 + x * x), 1, "f"), 0.0, radii, cfg);
    auto b = check_palais_smale(FunctionHandle(powi(x * y - 1.0, 2) + powi(x - 1.0, 2), 2, "ha"), 1.0, radii, cfg);
    auto c = check_palais_smale(FunctionHandle(x * x, 1, "f"), 1.0, radii, cfg);
    // On |x^2 - 1| <= eps the slope 2|x| is at least 2 sqrt(1 - eps).
    const double bound = 2.0 * std::sqrt(1.0 - cfg.eps_rel);
    bool slope_ok = c.inner_min_slope && *c.inner_min_slope >= bound * (1.0 - 1e-12);
    return {a.status == PSStatus::fails && b.status == PSStatus::fails && c.status == PSStatus::holds && slope_ok,
            "x/(1+x^2)@0 " + std::string(ps_status_name(a.status)) + ", ha@1 " + std::string(ps_status_name(b.status)) +
                ", x^2@1 " + std::string(ps_status_name(c.status)) +
                fmt(" (min slab slope %.6f", c.inner_min_slope.value_or(NAN)) + fmt(" >= %.6f)", bound)};
}

std::vector<std::string> corpus_reports;

Outcome corpus_verdicts() {
    AnalysisConfig cfg;
    int matched = 0;
    std::ostringstream os;
    corpus_reports.clear();
    for (const auto& e : corpus()) {
        auto r = run_analysis(parse_function(e.spec), cfg);
        corpus_reports.push_back(r.report_json);
        bool warned = e.expected_warning.empty();
        for (const auto& w : r.warnings) warned = warned || w == e.expected_warning;
        bool ok = r.verdict.kind == e.expected && warned;
        matched += ok ? 1 : 0;
        os << e.name << "=" << verdict_name(r.verdict.kind) << (ok ? "" : "(!)") << " ";
    }
    os << "(" << matched << "/" << corpus().size() << ")";
    return {matched == static_cast<int>(corpus().size()), os.str()};
}

Outcome exponent_recovery() {
    FiberConfig cfg;
    auto grid = LevelGrid::geometric(1e-4, 1e2, 24);
    auto radii = geometric_radii(4, 4, 3);
    double worst = 0.0;
    for (int m = 1; m <= 3; ++m) {
        auto s = sublevel(powi(x, 2 * m), 1, radii.back(), cfg.sampler, cfg.member_tol);
        auto p = fiber_profile(s, grid, radii, cfg);
        auto mu = fit_exponent(p, ProfileKind::mu_near_zero, cfg);
        auto phi = fit_exponent(p, ProfileKind::phi_near_zero, cfg);
        worst = std::max(worst, std::fabs(mu.q - 1.0 / (2 * m)));
        worst = std::max(worst, std::fabs(phi.q - (2.0 * m - 1.0) / (2 * m)));
    }
    return {worst <= 0.05, fmt("worst exponent error %.2e", worst)};
}

Outcome subdifferential_kernel() {
    Rng rng(11);
    double hull_worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t k = 2 + rng.index(3), dim = 1 + rng.index(4);
        std::vector<Vec> gens(k, Vec(dim));
        for (auto& g : gens)
            for (double& c : g) c = rng.uniform(-2.0, 2.0);
        hull_worst = std::max(hull_worst, std::fabs(min_norm_point(gens).norm - testing::simplex_grid_min_norm(gens)));
    }

    Rng r2(2024);
    double grad_worst = 0.0;
    for (int checked = 0; checked < 1000;) {
        int n = 1 + static_cast<int>(r2.index(3));
        FunctionHandle f(testing::random_expr(r2, n, 4), n, "f");
        for (int rep = 0; rep < 5 && checked < 1000; ++rep) {
            Point p(static_cast<std::size_t>(n));
            for (double& c : p) c = r2.uniform(-1.5, 1.5);
            if (testing::kink_gap(*f.root(), p, n) < 1e-3 || std::fabs(evaluate(f, p)) > 1e3) continue;
            Vec g = gradient(f, p);
            for (std::size_t i = 0; i < p.size(); ++i) {
                Point a = p, b = p;
                a[i] += 1e-6;
                b[i] -= 1e-6;
                double fd = (evaluate(f, a) - evaluate(f, b)) / 2e-6;
                grad_worst = std::max(grad_worst, std::fabs(fd - g[i]) / std::max(1.0, std::fabs(g[i])));
            }
            ++checked;
        }
    }

    Rng r3(99);
    double chain_worst = -INFINITY;
    for (int checked = 0; checked < 1000;) {
        int n = 1 + static_cast<int>(r3.index(3));
        FunctionHandle f(testing::random_expr(r3, n, 3), n, "f");
        Point p(static_cast<std::size_t>(n));
        for (double& c : p) c = r3.uniform(-1.5, 1.5);
        if (r3.uniform() < 0.3) p[0] = 0.0;
        if (n > 1 && r3.uniform() < 0.3) p[1] = p[0];
        if (std::fabs(evaluate(f, p)) > 50.0) continue;
        double mf = nonsmooth_slope(f, p);
        chain_worst = std::max(chain_worst, mf - strong_slope_estimate(f, p));
        ++checked;
    }
    return {hull_worst <= 1e-4 && grad_worst <= 1e-5 && chain_worst <= 1e-6,
            fmt("hull err %.2e", hull_worst) + fmt(", gradient rel err %.2e", grad_worst) +
                fmt(", max(m_f - strong) %.2e", chain_worst)};
}

Outcome holder_identity() {
    CloudConfig cfg;
    auto radii = geometric_radii(4, 4, 8);
    auto s = sublevel(x * x, 1, radii.back(), cfg.sampler, cfg.member_tol);
    auto cloud = build_cloud(s, radii, cfg);
    auto g = default_exponent_grid();
    auto fit = fit_holder(cloud, g, g);
    int violations = 0;
    for (const auto& p : cloud.points) {
        if (p.in_s) continue;
        double bound = fit.c * (std::pow(p.fplus, fit.alpha) + std::pow(p.fplus, fit.beta));
        if (p.d > bound * (1.0 + 1e-12)) ++violations;
    }
    return {fit.alpha == 0.5 && fit.beta == 0.5 && fit.c <= 1.05 && violations == 0,
            fmt("alpha %.4f", fit.alpha) + fmt(", beta %.4f", fit.beta) + fmt(", c %.6f", fit.c) + ", " +
                std::to_string(violations) + " violations on " + std::to_string(fit.used) + " points"};
}

Outcome determinism() {
    if (corpus_reports.size() != corpus().size()) return {false, "corpus run missing"};
    AnalysisConfig cfg;
    int same = 0;
    auto entries = corpus();
    for (std::size_t i = 0; i < entries.size(); ++i)
        same += run_analysis(parse_function(entries[i].spec), cfg).report_json == corpus_reports[i] ? 1 : 0;
    return {same == static_cast<int>(entries.size()),
            std::to_string(same) + "/" + std::to_string(entries.size()) + " report.json byte-identical on rerun"};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"mu oracle agreement", mu_oracle},
        {"near verdicts", near_verdicts},
        {"far verdict", far_verdict},
        {"asymptotic critical values", kinf_detection},
        {"palais-smale", palais_smale},
        {"corpus verdicts", corpus_verdicts},
        {"exponent recovery", exponent_recovery},
        {"subdifferential kernel", subdifferential_kernel},
        {"holder fit identity", holder_identity},
        {"determinism", determinism},
    };
    int failed = 0, index = 0;
    for (const auto& c : criteria) {
        ++index;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
