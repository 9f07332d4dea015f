#include <cmath>
#include <cstring>

#include "doctest.h"
#include "ebound/kernels.hpp"
#include "ebound/random.hpp"

using namespace ebound;
namespace k = ebound::kernels;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// Plain loop without lane interleaving; sums may differ from the kernel's
// in the last bits, max and argmax may not.
k::RatioScan naive_ratio(std::span<const double> n, std::span<const double> a,
                         std::span<const double> b) {
    k::RatioScan r;
    for (std::size_t i = 0; i < n.size(); ++i) {
        double v = n[i] / (a[i] + b[i]);
        r.sum += v;
        if (v > r.max) {
            r.max = v;
            r.argmax = i;
        }
    }
    return r;
}

}  // namespace

TEST_CASE("ratio_scan scalar reference matches a plain loop") {
    Rng rng(3);
    for (std::size_t len : {0u, 1u, 3u, 4u, 5u, 17u, 1000u}) {
        std::vector<double> n(len), a(len), b(len);
        for (std::size_t i = 0; i < len; ++i) {
            n[i] = rng.uniform(0.0, 3.0);
            a[i] = rng.uniform(0.1, 2.0);
            b[i] = rng.uniform(0.0, 2.0);
        }
        auto ref = naive_ratio(n, a, b);
        auto got = k::scalar::ratio_scan(n, a, b);
        CHECK(got.max == ref.max);
        CHECK(got.argmax == ref.argmax);
        CHECK(got.sum == doctest::Approx(ref.sum).epsilon(1e-12));
    }
}

TEST_CASE("ratio_scan picks the first of tied maxima") {
    std::vector<double> n{1, 2, 2, 2, 1, 2}, a{1, 1, 1, 1, 1, 1}, b{0, 0, 0, 0, 0, 0};
    CHECK(k::scalar::ratio_scan(n, a, b).argmax == 1);
#ifdef EBOUND_HAVE_AVX2_KERNELS
    if (k::supported(k::Isa::avx2)) CHECK(k::avx2::ratio_scan(n, a, b).argmax == 1);
#endif
}

TEST_CASE("nearest scalar reference matches a plain loop") {
    Rng rng(4);
    const std::size_t dim = 3, count = 37;
    std::vector<double> coords(dim * count);
    for (double& c : coords) c = rng.uniform(-5.0, 5.0);
    std::vector<double> q{0.5, -1.0, 2.0};
    double best = 1e300;
    std::size_t idx = k::npos;
    for (std::size_t i = 0; i < count; ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) s += (coords[d * count + i] - q[d]) * (coords[d * count + i] - q[d]);
        if (s < best) {
            best = s;
            idx = i;
        }
    }
    auto r = k::scalar::nearest(q, coords, count);
    CHECK(r.index == idx);
    CHECK(r.sq_dist == best);
    CHECK(k::scalar::nearest(q, {}, 0).index == k::npos);
}

#ifdef EBOUND_HAVE_AVX2_KERNELS
TEST_CASE("avx2 kernels are bit-identical to the scalar reference") {
    if (!k::supported(k::Isa::avx2)) return;
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t len = rng.index(300);
        std::vector<double> n(len), a(len), b(len);
        for (std::size_t i = 0; i < len; ++i) {
            n[i] = std::pow(10.0, rng.uniform(-8.0, 8.0));
            a[i] = std::pow(10.0, rng.uniform(-8.0, 8.0));
            b[i] = rng.uniform() < 0.2 ? 0.0 : std::pow(10.0, rng.uniform(-8.0, 8.0));
        }
        auto s = k::scalar::ratio_scan(n, a, b);
        auto v = k::avx2::ratio_scan(n, a, b);
        CHECK(same_bits(s.max, v.max));
        CHECK(s.argmax == v.argmax);
        CHECK(same_bits(s.sum, v.sum));

        std::size_t dim = 1 + rng.index(4);
        std::size_t count = rng.index(200);
        std::vector<double> coords(dim * count), q(dim);
        for (double& c : coords) c = rng.uniform(-100.0, 100.0);
        for (double& c : q) c = rng.uniform(-100.0, 100.0);
        // Duplicate a point so ties are exercised.
        if (count > 10)
            for (std::size_t d = 0; d < dim; ++d) coords[d * count + 9] = coords[d * count + 2];
        auto ns = k::scalar::nearest(q, coords, count);
        auto nv = k::avx2::nearest(q, coords, count);
        CHECK(ns.index == nv.index);
        CHECK(same_bits(ns.sq_dist, nv.sq_dist));
    }
}
#endif

TEST_CASE("isa selection") {
    CHECK(k::supported(k::Isa::scalar));
    auto before = k::active_isa();
    k::set_isa(k::Isa::scalar);
    CHECK(k::active_isa() == k::Isa::scalar);
    CHECK(k::isa_name(k::Isa::scalar) == "scalar");
    k::set_isa(before);
}
