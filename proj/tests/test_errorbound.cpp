#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ebound/errorbound.hpp"
#include "ebound/errors.hpp"

using namespace ebound;
using doctest::Approx;

namespace {

const Expr x = var(0);
const Expr y = var(1);

SampleCloud cloud_for(const Expr& e, int n, std::vector<double> scales) {
    CloudConfig cfg;
    auto s = make_sublevel(FunctionHandle(e, n, "f"), cfg.member_tol, scales.back(), cfg.sampler);
    return build_cloud(s, scales, cfg);
}

// Worst relative excess of d over c([f]_+^a + [f]_+^b), recomputed point by point.
double holder_excess(const SampleCloud& cloud, const HolderFit& fit) {
    double worst = -1.0;
    for (const auto& p : cloud.points) {
        if (p.in_s) continue;
        double bound = fit.c * (std::pow(p.fplus, fit.alpha) + std::pow(p.fplus, fit.beta));
        worst = std::max(worst, (p.d - bound) / std::max(p.d, bound));
    }
    return worst;
}

double hormander_excess(const SampleCloud& cloud, const HormanderFit& fit) {
    double worst = -1.0;
    for (const auto& p : cloud.points) {
        if (p.in_s) continue;
        double lhs = p.fplus * (1.0 + std::pow(norm(p.x), fit.beta));
        double rhs = fit.c * std::pow(p.d, fit.alpha);
        worst = std::max(worst, (rhs - lhs) / std::max(rhs, lhs));
    }
    return worst;
}

TrendVerdict trend(Trend k) {
    TrendVerdict v;
    v.kind = k;
    return v;
}

PSVerdict ps(double t, PSStatus s) {
    PSVerdict v;
    v.level = t;
    v.status = s;
    return v;
}

HolderFit holder(bool stable) {
    HolderFit f;
    f.c = 0.5;
    f.alpha = f.beta = 0.5;
    f.stable = stable;
    return f;
}

}  // namespace

TEST_CASE("grids") {
    auto g = default_exponent_grid();
    REQUIRE(g.size() == 36);
    CHECK(g.front() == 1.0 / 12.0);
    CHECK(g.back() == 3.0);
    auto b = default_hormander_beta_grid();
    CHECK(b.size() == 37);
    CHECK(b.front() == 0.0);
}

TEST_CASE("cloud construction") {
    auto cloud = cloud_for(x * x, 1, {4.0, 16.0, 64.0});
    CHECK(cloud.points.size() == 3 * 48);
    CHECK(cloud.excluded == 0);
    // Largest [f]_+ per shell tracks R^2.
    for (std::size_t j = 0; j < 3; ++j) {
        double top = 0.0;
        for (const auto& p : cloud.points)
            if (p.scale == j) top = std::max(top, p.fplus);
        double r = cloud.scales[j];
        CHECK(top <= r * r);
        CHECK(top >= 0.6 * r * r);
    }
    for (const auto& p : cloud.points) {
        CHECK(p.f == evaluate(FunctionHandle(x * x, 1, "f"), p.x));
        CHECK(p.fplus == std::max(0.0, p.f));
        CHECK(p.d == Approx(std::fabs(p.x[0])).epsilon(1e-6));
    }
    CloudConfig cfg;
    auto s = make_sublevel(FunctionHandle(x * x, 1, "f"), cfg.member_tol, 4.0, cfg.sampler);
    CHECK_THROWS_AS(build_cloud(s, {}, cfg), Error);
    CHECK_THROWS_AS(cloud_for(x * x, 1, {4.0, 2.0}), Error);
}

TEST_CASE("cloud carries escaping points of x / (1 + x^2)") {
    auto cloud = cloud_for(x / (1.0 + x * x), 1, {4.0, 16.0, 64.0, 256.0});
    bool found = false;
    for (const auto& p : cloud.points) found = found || (p.fplus <= 1e-2 && p.d >= 100.0);
    CHECK(found);
    CloudConfig cfg;
    auto s = make_sublevel(FunctionHandle(x * x, 1, "f"), cfg.member_tol, 4.0, cfg.sampler);
    std::vector<double> scales{4.0};
    std::vector<Point> extra{{0.5}, {-3.0}};
    auto c = build_cloud(s, scales, cfg, extra);
    CHECK(c.imported == 2);
    CHECK(c.points.back().x == Point{-3.0});
    CHECK(c.points.back().fplus == 9.0);
}

TEST_CASE("holder fits") {
    auto g = default_exponent_grid();
    auto radii = geometric_radii(4, 4, 8);
    {
        // d = |x| = [f]_+^(1/2) exactly, so c = 1/2 with alpha = beta = 1/2.
        auto cloud = cloud_for(x * x, 1, radii);
        auto fit = fit_holder(cloud, g, g);
        CHECK(fit.alpha == 0.5);
        CHECK(fit.beta == 0.5);
        CHECK(fit.c <= 1.05);
        CHECK(fit.c == Approx(0.5).epsilon(1e-6));
        CHECK(fit.stable);
        CHECK(fit.max_violation <= 1e-12);
        CHECK(holder_excess(cloud, fit) <= 1e-12);
        CHECK(fit.support.size() == 3);
    }
    {
        auto cloud = cloud_for(x, 1, radii);
        auto fit = fit_holder(cloud, g, g);
        CHECK(fit.alpha == 1.0);
        CHECK(fit.beta == 1.0);
        CHECK(fit.c == Approx(0.5).epsilon(1e-9));
        CHECK(holder_excess(cloud, fit) <= 1e-12);
    }
    {
        auto small = cloud_for(x / (1.0 + x * x), 1, geometric_radii(4, 4, 4));
        auto large = cloud_for(x / (1.0 + x * x), 1, radii);
        auto a = fit_holder(small, g, g);
        auto b = fit_holder(large, g, g);
        CHECK_FALSE(b.stable);
        std::vector<double> ga{a.alpha}, gb{a.beta};
        CHECK(fit_holder(large, ga, gb).c > 10.0 * a.c);
        CHECK(holder_excess(large, b) <= 1e-12);
    }
    {
        auto cloud = cloud_for(2.0 * x * x + x * y + y * y, 2, radii);
        auto fit = fit_holder(cloud, g, g);
        CHECK(fit.stable);
        CHECK(holder_excess(cloud, fit) <= 1e-12);
    }
}

TEST_CASE("hormander fits") {
    auto g = default_exponent_grid();
    auto gb = default_hormander_beta_grid();
    auto radii = geometric_radii(4, 4, 8);
    {
        // x / (1 + x^2) * (1 + x^2) = x = d on x > 0.
        auto cloud = cloud_for(x / (1.0 + x * x), 1, radii);
        auto fit = fit_hormander(cloud, g, gb);
        CHECK(fit.alpha == 1.0);
        CHECK(fit.beta == 2.0);
        CHECK(fit.c == Approx(1.0).epsilon(1e-6));
        CHECK(fit.stable);
        CHECK(hormander_excess(cloud, fit) <= 1e-12);
    }
    {
        // beta = 0 is the plain Holder form: 2 x^2 >= c |x|^2.
        auto cloud = cloud_for(x * x, 1, radii);
        auto fit = fit_hormander(cloud, g, gb);
        CHECK(fit.beta == 0.0);
        CHECK(fit.alpha == 2.0);
        CHECK(fit.c == Approx(2.0).epsilon(1e-6));
    }
    {
        // Oracle: on a dense grid of (0, R], inf of f (1 + x) / x for
        // f = x / sqrt(1 + x^2), at the two largest radii.
        auto oracle = [](double R) {
            double best = INFINITY;
            for (int i = 1; i <= 200000; ++i) {
                double t = R * std::pow(1e-9, 1.0 - i / 200000.0);
                best = std::min(best, (1.0 + t) / std::sqrt(1.0 + t * t));
            }
            return best;
        };
        double o7 = oracle(radii[6]), o8 = oracle(radii[7]);
        REQUIRE(std::fabs(o8 - o7) < 0.25 * o7);
        auto cloud = cloud_for(x / sqrt(1.0 + x * x), 1, radii);
        std::vector<double> one{1.0};
        auto fit = fit_hormander(cloud, one, one);
        CHECK(fit.stable);
        CHECK(fit.c >= o8 * (1.0 - 1e-12));
        CHECK(fit.c == Approx(o8).epsilon(0.05));
        CHECK(hormander_excess(cloud, fit) <= 1e-12);
    }
}

TEST_CASE("fit errors") {
    auto g = default_exponent_grid();
    // -x^2 <= 0 everywhere, so the whole cloud lies in S.
    auto cloud = cloud_for(-(x * x), 1, {4.0, 16.0});
    try {
        fit_holder(cloud, g, g);
        FAIL("expected nothing_to_fit");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitError::Kind::nothing_to_fit);
    }
    CHECK_THROWS_AS(fit_hormander(cloud, g, g), FitError);
    auto ok = cloud_for(x * x, 1, {4.0, 16.0});
    std::vector<double> zero{0.0}, empty;
    CHECK_THROWS_AS(fit_holder(ok, zero, g), FitError);
    CHECK_THROWS_AS(fit_holder(ok, g, zero), FitError);
    CHECK_THROWS_AS(fit_holder(ok, empty, g), FitError);
    CHECK_NOTHROW(fit_hormander(ok, g, zero));
}

TEST_CASE("global verdict rules") {
    std::vector<PSVerdict> none;
    {
        auto near = trend(Trend::diverges);
        near.witness.push_back({{100.0}, 0.01, 100.0, 256.0});
        auto v = global_verdict(near, trend(Trend::diverges), none, holder(true));
        CHECK(v.kind == VerdictKind::fails_near);
        CHECK(v.witness.size() == 1);
    }
    CHECK(global_verdict(trend(Trend::bounded), trend(Trend::diverges), none, holder(true)).kind ==
          VerdictKind::fails_far);
    CHECK(global_verdict(trend(Trend::converges_to_zero), trend(Trend::bounded), none, holder(true)).kind ==
          VerdictKind::holds);
    {
        auto v = global_verdict(trend(Trend::converges_to_zero), trend(Trend::bounded), none, holder(false));
        CHECK(v.kind == VerdictKind::inconclusive);
        CHECK_FALSE(v.reasons.empty());
    }
    CHECK(global_verdict(trend(Trend::converges_to_zero), trend(Trend::bounded), none, std::nullopt).kind ==
          VerdictKind::inconclusive);
    CHECK(global_verdict(trend(Trend::bounded), trend(Trend::bounded), none, holder(true)).kind ==
          VerdictKind::inconclusive);

    std::vector<PSVerdict> all_hold{ps(0.0, PSStatus::holds), ps(1.0, PSStatus::holds), ps(-1.0, PSStatus::fails)};
    {
        auto v = global_verdict(trend(Trend::converges_to_zero), trend(Trend::bounded), all_hold, holder(false));
        CHECK(v.kind == VerdictKind::holds);
        CHECK(v.warnings.size() == 1);
    }
    // The upgrade never produces holds next to a non-converging near trend.
    CHECK(global_verdict(trend(Trend::bounded), trend(Trend::bounded), all_hold, holder(false)).kind ==
          VerdictKind::inconclusive);

    std::vector<PSVerdict> one_fails{ps(0.0, PSStatus::holds), ps(2.0, PSStatus::fails)};
    {
        auto v = global_verdict(trend(Trend::converges_to_zero), trend(Trend::bounded), one_fails, holder(true));
        CHECK(v.kind == VerdictKind::inconclusive);
        CHECK(std::find(v.warnings.begin(), v.warnings.end(), "palais_smale_fails") != v.warnings.end());
    }
    CHECK(verdict_name(VerdictKind::fails_far) == "FailsFar");
}
