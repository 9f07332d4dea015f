#include "ebound/local_search.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "ebound/errors.hpp"

namespace ebound {

std::optional<double> try_evaluate(const FunctionHandle& f, std::span<const double> x) {
    try {
        double v = evaluate(f, x);
        if (!std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

std::optional<Vec> descent_direction(const FunctionHandle& f, std::span<const double> x,
                                     double tie_tol) {
    try {
        return gradient(f, x, tie_tol);
    } catch (const NonsmoothError&) {
    } catch (const DomainError&) {
        return std::nullopt;
    }
    try {
        return min_norm_point(subdiff_generators(f, x, tie_tol)).point;
    } catch (const Error&) {
        return std::nullopt;
    }
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::optional<Point> solve_level(const FunctionHandle& f, Point y, double target,
                                 const std::function<bool(double)>& done,
                                 const LevelSolveOptions& opts) {
    auto fy = try_evaluate(f, y);
    if (!fy) return std::nullopt;
    if (done(*fy)) return y;
    const std::size_t n = y.size();
    Point cand(n);
    double checkpoint = std::fabs(*fy - target);
    for (int it = 0; it < opts.max_iters; ++it) {
        // Give up on crawls: the residual must halve every 16 steps.
        if (it > 0 && it % 16 == 0) {
            double res = std::fabs(*fy - target);
            if (res > 0.5 * checkpoint) return std::nullopt;
            checkpoint = res;
        }
        auto g = descent_direction(f, y);
        if (!g) return std::nullopt;
        double gg = 0.0;
        for (double c : *g) gg += c * c;
        if (!(gg > 0.0) || !std::isfinite(gg)) return std::nullopt;
        double r = *fy - target;
        double scale = -r / gg;
        double len = std::fabs(scale) * std::sqrt(gg);
        double cap = 4.0 * (1.0 + norm(y));
        if (len > cap) scale *= cap / len;

        // A doubled step first: it lands on the level in one step when f
        // behaves like a squared distance near a minimum.
        bool accepted = false;
        double alpha = 2.0;
        for (int bt = 0; bt < 40; ++bt, alpha *= 0.5) {
            for (std::size_t j = 0; j < n; ++j) cand[j] = y[j] + alpha * scale * (*g)[j];
            if (opts.ball_radius > 0.0) {
                double cn = norm(cand);
                if (cn > opts.ball_radius)
                    for (double& c : cand) c *= opts.ball_radius / cn;
            }
            auto fc = try_evaluate(f, cand);
            if (fc && std::fabs(*fc - target) < std::fabs(r)) {
                y = cand;
                fy = fc;
                accepted = true;
                break;
            }
        }
        if (!accepted) return std::nullopt;
        if (done(*fy)) return y;
    }
    return std::nullopt;
}

MinimizeResult bfgs_minimize(const SmoothObjective& fn, Point x0, int max_iters, double armijo,
                             double shrink) {
    const auto n = static_cast<Eigen::Index>(x0.size());
    MinimizeResult res;
    Vec g(x0.size());
    auto v0 = fn(x0, g);
    res.x = x0;
    if (!v0) {
        res.value = std::numeric_limits<double>::infinity();
        return res;
    }
    res.value = *v0;

    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(x0.data(), n);
    Eigen::VectorXd grad = Eigen::Map<Eigen::VectorXd>(g.data(), n);
    Point trial(x0.size());
    Vec gt(x0.size());

    for (int it = 0; it < max_iters; ++it) {
        res.iters = it;
        double gnorm = grad.norm();
        if (!(gnorm > 1e-300) || !std::isfinite(gnorm)) break;
        Eigen::VectorXd dir = -hinv * grad;
        double slope = grad.dot(dir);
        if (!(slope < 0.0)) {
            hinv.setIdentity();
            dir = -grad;
            slope = -gnorm * gnorm;
        }
        // Keep the first step comparable to the iterate's scale.
        double dn = dir.norm();
        double cap = 1.0 + x.norm();
        double alpha = dn > cap ? cap / dn : 1.0;
        bool ok = false;
        double vt = 0.0;
        for (int bt = 0; bt < 60; ++bt, alpha *= shrink) {
            for (Eigen::Index j = 0; j < n; ++j) trial[static_cast<std::size_t>(j)] = x(j) + alpha * dir(j);
            auto v = fn(trial, gt);
            if (v && *v <= res.value + armijo * alpha * slope) {
                vt = *v;
                ok = true;
                break;
            }
        }
        if (!ok) break;
        Eigen::VectorXd xn = Eigen::Map<Eigen::VectorXd>(trial.data(), n);
        Eigen::VectorXd gn = Eigen::Map<Eigen::VectorXd>(gt.data(), n);
        Eigen::VectorXd s = xn - x;
        Eigen::VectorXd yv = gn - grad;
        double sy = s.dot(yv);
        if (sy > 1e-300 * s.squaredNorm()) {
            double rho = 1.0 / sy;
            Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
            hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) +
                   rho * s * s.transpose();
        }
        double prev = res.value;
        x = xn;
        grad = gn;
        res.value = vt;
        if (std::fabs(prev - vt) <= 1e-15 * std::max(1.0, std::fabs(prev)) && s.norm() <= 1e-14 * (1.0 + x.norm()))
            break;
    }
    res.x.assign(x.data(), x.data() + n);
    return res;
}

}  // namespace ebound
