#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "ebound/expr.hpp"

namespace ebound {

namespace {

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Minimiser of |sum a_i p_i| over the affine hull of the selected points:
// [G 1; 1' 0] [a; mu] = [0; 1] with G the Gram matrix.
Eigen::VectorXd affine_minimizer(std::span<const Vec> pts, const std::vector<std::size_t>& sel) {
    const auto k = static_cast<Eigen::Index>(sel.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            double g = dot(pts[sel[static_cast<std::size_t>(i)]], pts[sel[static_cast<std::size_t>(j)]]);
            kkt(i, j) = g;
            kkt(j, i) = g;
        }
        kkt(i, k) = 1.0;
        kkt(k, i) = 1.0;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    rhs(k) = 1.0;
    Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    return sol.head(k);
}

Vec combine(std::span<const Vec> pts, const std::vector<std::size_t>& sel,
            const std::vector<double>& w, std::size_t dim) {
    Vec x(dim, 0.0);
    for (std::size_t i = 0; i < sel.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j) x[j] += w[i] * pts[sel[i]][j];
    return x;
}

}  // namespace

MinNormResult min_norm_point(std::span<const Vec> pts) {
    MinNormResult out;
    if (pts.empty()) return out;
    const std::size_t dim = pts[0].size();
    out.weights.assign(pts.size(), 0.0);

    double max_sq = 0.0;
    std::size_t start = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double sq = dot(pts[i], pts[i]);
        max_sq = std::max(max_sq, sq);
        if (sq < best_sq) {
            best_sq = sq;
            start = i;
        }
    }
    if (pts.size() == 1 || max_sq == 0.0) {
        out.point = pts[start];
        out.norm = norm(out.point);
        out.weights[start] = 1.0;
        return out;
    }

    std::vector<std::size_t> sel{start};
    std::vector<double> lambda{1.0};
    Vec x = pts[start];
    const double tol_major = 1e-14 * max_sq;
    const double tol_weight = 1e-14;

    for (int major = 0; major < 500; ++major) {
        double xx = dot(x, x);
        std::size_t j = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double v = dot(x, pts[i]);
            if (v < best) {
                best = v;
                j = i;
            }
        }
        if (best > xx - tol_major) break;
        if (std::find(sel.begin(), sel.end(), j) != sel.end()) break;
        if (sel.size() > dim) break;  // affinely dependent; x is optimal to rounding
        sel.push_back(j);
        lambda.push_back(0.0);

        for (int minor = 0; minor < 500; ++minor) {
            Eigen::VectorXd a = affine_minimizer(pts, sel);
            bool interior = true;
            for (Eigen::Index i = 0; i < a.size(); ++i)
                if (!(a(i) > tol_weight)) interior = false;
            if (interior) {
                for (std::size_t i = 0; i < sel.size(); ++i) lambda[i] = a(static_cast<Eigen::Index>(i));
                break;
            }
            double theta = 1.0;
            for (std::size_t i = 0; i < sel.size(); ++i) {
                double ai = a(static_cast<Eigen::Index>(i));
                if (ai <= tol_weight && lambda[i] - ai > 0.0)
                    theta = std::min(theta, lambda[i] / (lambda[i] - ai));
            }
            for (std::size_t i = 0; i < sel.size(); ++i)
                lambda[i] = theta * a(static_cast<Eigen::Index>(i)) + (1.0 - theta) * lambda[i];
            std::vector<std::size_t> keep_sel;
            std::vector<double> keep_lambda;
            for (std::size_t i = 0; i < sel.size(); ++i) {
                if (lambda[i] > tol_weight) {
                    keep_sel.push_back(sel[i]);
                    keep_lambda.push_back(lambda[i]);
                }
            }
            if (keep_sel.size() == sel.size()) {
                // theta hit no boundary because of rounding; drop the smallest weight
                auto it = std::min_element(keep_lambda.begin(), keep_lambda.end());
                auto pos = static_cast<std::size_t>(it - keep_lambda.begin());
                keep_sel.erase(keep_sel.begin() + static_cast<std::ptrdiff_t>(pos));
                keep_lambda.erase(it);
            }
            double total = 0.0;
            for (double l : keep_lambda) total += l;
            for (double& l : keep_lambda) l /= total;
            sel = std::move(keep_sel);
            lambda = std::move(keep_lambda);
            if (sel.size() == 1) break;
        }
        Vec next = combine(pts, sel, lambda, dim);
        if (dot(next, next) > xx * (1.0 + 1e-15) && major > 0) break;
        x = std::move(next);
    }

    out.point = x;
    out.norm = norm(x);
    for (std::size_t i = 0; i < sel.size(); ++i) out.weights[sel[i]] = lambda[i];
    return out;
}

MinNormResult min_norm_point(const SubdiffHull& hull) { return min_norm_point(hull.generators); }

}  // namespace ebound
