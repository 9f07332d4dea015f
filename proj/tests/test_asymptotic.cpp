#include <cfloat>
#include <chrono>
#include <cmath>

#include "doctest.h"
#include "ebound/asymptotic.hpp"
#include "ebound/errors.hpp"
#include "ebound/random.hpp"

using namespace ebound;
using doctest::Approx;

namespace {

const Expr x = var(0);
const Expr y = var(1);

Expr ha() { return powi(x * y - 1.0, 2) + powi(x - 1.0, 2); }

// x^T (B^T B + I) x with a seeded random B.
Expr pd_quadratic(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> b(n, std::vector<double>(n));
    for (auto& row : b)
        for (double& v : row) v = rng.normal();
    Expr e = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double a = i == j ? 1.0 : 0.0;
            for (int k = 0; k < n; ++k) a += b[k][i] * b[k][j];
            e = e + a * var(i) * var(j);
        }
    }
    return e;
}

void check_witness(const FunctionHandle& f, const LevelScan& scan) {
    REQUIRE(scan.witness.size() >= 3);
    for (std::size_t j = 0; j < scan.witness.size(); ++j) {
        const auto& c = scan.witness[j];
        REQUIRE(c.s.has_value());
        CHECK(std::fabs(evaluate(f, c.at) - scan.level) <= scan.eps);
        CHECK(nonsmooth_slope(f, c.at) == *c.s);
        if (j > 0) CHECK(norm(c.at) >= 2.0 * norm(scan.witness[j - 1].at));
    }
}

}  // namespace

TEST_CASE("defaults") {
    auto levels = default_kinf_levels();
    REQUIRE(levels.size() == 21);
    CHECK(levels.front() == -2.0);
    CHECK(levels[10] == 0.0);
    CHECK(levels.back() == 2.0);
    auto radii = default_kinf_radii();
    CHECK(radii.front() == 4.0);
    CHECK(radii.back() == std::pow(4.0, 13));
}

TEST_CASE("bad inputs") {
    FunctionHandle f(x * x, 1, "f");
    KinfConfig cfg;
    std::vector<double> levels{1.0};
    std::vector<double> unsorted{4.0, 2.0};
    std::vector<double> bad_level{NAN};
    std::vector<double> radii{4.0};
    CHECK_THROWS_AS(detect_kinf(f, levels, unsorted, cfg), Error);
    CHECK_THROWS_AS(detect_kinf(f, bad_level, radii, cfg), Error);
    CHECK_THROWS_AS(check_palais_smale(f, INFINITY, radii, cfg), Error);
}

TEST_CASE("the ha example flags level 1 only") {
    FunctionHandle f(ha(), 2, "ha");
    KinfConfig cfg;
    std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    auto rep = detect_kinf(f, levels, default_kinf_radii(), cfg);
    CHECK(rep.flagged == std::vector<double>{1.0});
    CHECK(rep.warnings.empty());

    const auto& scan = rep.levels.back();
    check_witness(f, scan);
    // Along ((1+k)/(1+k^2), k) the gradient is (0, 2(k^2-1)/(1+k^2)^2). Cells
    // before the decay starts and cells where rounding in the x-partial
    // (about 2 eps |y|) swamps the true value are not comparable.
    int compared = 0;
    for (const auto& c : scan.witness) {
        const double k = c.at[1];
        const double expected = 2.0 * (k * k - 1.0) / ((1.0 + k * k) * (1.0 + k * k));
        if (*c.s >= cfg.zero_band || expected < 2.0 * DBL_EPSILON * std::fabs(k)) continue;
        CHECK(c.at[0] == Approx((1.0 + k) / (1.0 + k * k)).epsilon(0.01));
        CHECK(*c.s == Approx(expected).epsilon(0.1));
        ++compared;
    }
    CHECK(compared >= 3);
}

TEST_CASE("x / (1 + y^2) flags almost every level") {
    FunctionHandle f(x / (1.0 + y * y), 2, "f");
    KinfConfig cfg;
    auto levels = default_kinf_levels();
    auto t0 = std::chrono::steady_clock::now();
    auto rep = detect_kinf(f, levels, default_kinf_radii(), cfg);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(rep.flagged.size() * 10 >= levels.size() * 9);
    CHECK(rep.warnings == std::vector<std::string>{"kinf_dense"});
    CHECK(secs < 120.0);
    for (const auto& scan : rep.levels)
        if (scan.flagged) check_witness(f, scan);
}

TEST_CASE("x^2 has no asymptotic critical values") {
    FunctionHandle f(x * x, 1, "f");
    KinfConfig cfg;
    std::vector<double> levels{0.25, 1.0, 2.0, 4.0};
    auto rep = detect_kinf(f, levels, default_kinf_radii(), cfg);
    CHECK(rep.flagged.empty());
}

TEST_CASE("palais-smale verdicts") {
    KinfConfig cfg;
    auto radii = default_kinf_radii();
    {
        FunctionHandle f(x / (1.0 + x * x), 1, "f");
        auto v = check_palais_smale(f, 0.0, radii, cfg);
        CHECK(v.status == PSStatus::fails);
        REQUIRE(v.witness.size() >= 3);
        // f'(x) = (1 - x^2) / (1 + x^2)^2 along the witnesses.
        for (const auto& c : v.witness) {
            const double a = c.at[0];
            CHECK(*c.s == Approx(std::fabs(1.0 - a * a) / ((1.0 + a * a) * (1.0 + a * a))).epsilon(1e-9));
        }
        CHECK(*v.witness.back().s < cfg.zero_band);
    }
    {
        FunctionHandle f(ha(), 2, "ha");
        CHECK(check_palais_smale(f, 1.0, radii, cfg).status == PSStatus::fails);
    }
    {
        FunctionHandle f(x * x, 1, "f");
        auto v = check_palais_smale(f, 1.0, radii, cfg);
        CHECK(v.status == PSStatus::holds);
        CHECK(v.witness.empty());
        // On |x^2 - 1| <= eps the slope 2|x| is at least 2 sqrt(1 - eps).
        REQUIRE(v.inner_min_slope.has_value());
        CHECK(*v.inner_min_slope >= 2.0 * std::sqrt(1.0 - 1e-3) * (1.0 - 1e-12));
        CHECK(*v.inner_min_slope <= 2.0 * std::sqrt(1.0 + 1e-3));
    }
}

TEST_CASE("palais-smale agrees with the level scan") {
    FunctionHandle f(x / (1.0 + y * y), 2, "f");
    KinfConfig cfg;
    auto radii = default_kinf_radii();
    std::vector<double> levels{-1.0, 0.4, 1.6};
    auto rep = detect_kinf(f, levels, radii, cfg);
    for (const auto& scan : rep.levels) {
        REQUIRE(scan.flagged);
        auto v = check_palais_smale(f, scan.level, radii, cfg);
        CHECK(v.status == PSStatus::fails);
        REQUIRE(v.witness.size() == scan.witness.size());
        for (std::size_t j = 0; j < v.witness.size(); ++j) {
            CHECK(v.witness[j].at == scan.witness[j].at);
            CHECK(v.witness[j].s == scan.witness[j].s);
        }
    }
}

TEST_CASE("scaling f by 5 scales the flagged levels") {
    KinfConfig cfg;
    KinfConfig scaled = cfg;
    scaled.zero_band *= 5.0;
    auto radii = default_kinf_radii();
    std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> levels5;
    for (double t : levels) levels5.push_back(5.0 * t);
    auto a = detect_kinf(FunctionHandle(ha(), 2, "ha"), levels, radii, cfg);
    auto b = detect_kinf(FunctionHandle(5.0 * ha(), 2, "ha5"), levels5, radii, scaled);
    REQUIRE(a.flagged.size() == b.flagged.size());
    for (std::size_t i = 0; i < a.flagged.size(); ++i)
        CHECK(std::fabs(b.flagged[i] - 5.0 * a.flagged[i]) <= 1e-3 * std::max(1.0, std::fabs(b.flagged[i])));
}

TEST_CASE("positive definite quadratics are never flagged") {
    KinfConfig cfg;
    auto radii = default_kinf_radii();
    auto levels = default_kinf_levels();
    for (int n : {2, 3}) {
        for (std::uint64_t seed : {1u, 2u}) {
            FunctionHandle f(pd_quadratic(n, seed), n, "q");
            auto rep = detect_kinf(f, levels, radii, cfg);
            CHECK(rep.flagged.empty());
            CHECK(rep.warnings.empty());
        }
    }
}

TEST_CASE("decay csv and determinism") {
    FunctionHandle f(x / (1.0 + x * x), 1, "f");
    KinfConfig cfg;
    std::vector<double> levels{0.0, 0.3};
    std::vector<double> radii{4.0, 16.0};
    auto rep = detect_kinf(f, levels, radii, cfg);
    std::string csv = decay_csv(rep);
    CHECK(csv.rfind("level,radius,s\n", 0) == 0);
    CHECK(csv.find("0.3,4,\n") != std::string::npos);
    CHECK(decay_csv(detect_kinf(f, levels, radii, cfg)) == csv);
    KinfConfig threaded = cfg;
    threaded.sampler.threads = 4;
    CHECK(decay_csv(detect_kinf(f, levels, radii, threaded)) == csv);
}
