// Compiled with -mavx2; only entered after a runtime CPU check.
#include <immintrin.h>

#include "ebound/kernels.hpp"

namespace ebound::kernels::avx2 {

namespace {

struct Lanes {
    alignas(32) double value[4];
    alignas(32) double index[4];
};

}  // namespace

RatioScan ratio_scan(std::span<const double> num, std::span<const double> den_a,
                     std::span<const double> den_b) {
    const std::size_t n = num.size();
    const std::size_t body = n & ~std::size_t{3};

    __m256d acc = _mm256_setzero_pd();
    __m256d best = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    __m256d where = _mm256_set1_pd(-1.0);
    __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d step = _mm256_set1_pd(4.0);

    for (std::size_t i = 0; i < body; i += 4) {
        __m256d a = _mm256_loadu_pd(den_a.data() + i);
        __m256d b = _mm256_loadu_pd(den_b.data() + i);
        __m256d r = _mm256_div_pd(_mm256_loadu_pd(num.data() + i), _mm256_add_pd(a, b));
        acc = _mm256_add_pd(acc, r);
        __m256d gt = _mm256_cmp_pd(r, best, _CMP_GT_OQ);
        best = _mm256_blendv_pd(best, r, gt);
        where = _mm256_blendv_pd(where, idx, gt);
        idx = _mm256_add_pd(idx, step);
    }

    alignas(32) double accs[4];
    Lanes lanes;
    _mm256_store_pd(accs, acc);
    _mm256_store_pd(lanes.value, best);
    _mm256_store_pd(lanes.index, where);

    for (std::size_t i = body; i < n; ++i) {
        const std::size_t lane = i & 3;
        double r = num[i] / (den_a[i] + den_b[i]);
        accs[lane] += r;
        if (r > lanes.value[lane]) {
            lanes.value[lane] = r;
            lanes.index[lane] = static_cast<double>(i);
        }
    }

    RatioScan out;
    out.sum = (accs[0] + accs[1]) + (accs[2] + accs[3]);
    for (int l = 0; l < 4; ++l) {
        if (lanes.index[l] < 0.0) continue;
        auto at = static_cast<std::size_t>(lanes.index[l]);
        if (lanes.value[l] > out.max || (lanes.value[l] == out.max && at < out.argmax)) {
            out.max = lanes.value[l];
            out.argmax = at;
        }
    }
    return out;
}

Nearest nearest(std::span<const double> query, std::span<const double> coords, std::size_t count) {
    const std::size_t dim = query.size();
    const std::size_t body = count & ~std::size_t{3};

    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d where = _mm256_set1_pd(-1.0);
    __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d step = _mm256_set1_pd(4.0);

    for (std::size_t i = 0; i < body; i += 4) {
        __m256d s = _mm256_setzero_pd();
        for (std::size_t k = 0; k < dim; ++k) {
            __m256d d = _mm256_sub_pd(_mm256_set1_pd(query[k]),
                                      _mm256_loadu_pd(coords.data() + k * count + i));
            s = _mm256_add_pd(s, _mm256_mul_pd(d, d));
        }
        __m256d lt = _mm256_cmp_pd(s, best, _CMP_LT_OQ);
        best = _mm256_blendv_pd(best, s, lt);
        where = _mm256_blendv_pd(where, idx, lt);
        idx = _mm256_add_pd(idx, step);
    }

    Lanes lanes;
    _mm256_store_pd(lanes.value, best);
    _mm256_store_pd(lanes.index, where);
    for (std::size_t i = body; i < count; ++i) {
        const std::size_t lane = i & 3;
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            double d = query[k] - coords[k * count + i];
            s += d * d;
        }
        if (s < lanes.value[lane]) {
            lanes.value[lane] = s;
            lanes.index[lane] = static_cast<double>(i);
        }
    }

    Nearest out;
    for (int l = 0; l < 4; ++l) {
        if (lanes.index[l] < 0.0) continue;
        auto at = static_cast<std::size_t>(lanes.index[l]);
        if (lanes.value[l] < out.sq_dist || (lanes.value[l] == out.sq_dist && at < out.index)) {
            out.sq_dist = lanes.value[l];
            out.index = at;
        }
    }
    return out;
}

}  // namespace ebound::kernels::avx2
