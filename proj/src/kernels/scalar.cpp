#include "ebound/kernels.hpp"

namespace ebound::kernels::scalar {

RatioScan ratio_scan(std::span<const double> num, std::span<const double> den_a,
                     std::span<const double> den_b) {
    const std::size_t n = num.size();
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    double best[4];
    std::size_t where[4] = {npos, npos, npos, npos};
    for (double& b : best) b = -std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lane = i & 3;
        double r = num[i] / (den_a[i] + den_b[i]);
        acc[lane] += r;
        if (r > best[lane]) {
            best[lane] = r;
            where[lane] = i;
        }
    }

    RatioScan out;
    out.sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (int l = 0; l < 4; ++l) {
        if (where[l] == npos) continue;
        if (best[l] > out.max || (best[l] == out.max && where[l] < out.argmax)) {
            out.max = best[l];
            out.argmax = where[l];
        }
    }
    return out;
}

Nearest nearest(std::span<const double> query, std::span<const double> coords, std::size_t count) {
    Nearest out;
    const std::size_t dim = query.size();
    for (std::size_t i = 0; i < count; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            double d = query[k] - coords[k * count + i];
            s += d * d;
        }
        if (s < out.sq_dist) {
            out.sq_dist = s;
            out.index = i;
        }
    }
    return out;
}

}  // namespace ebound::kernels::scalar
