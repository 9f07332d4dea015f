#pragma once

#include <functional>
#include <optional>
#include <span>

#include "ebound/expr.hpp"

namespace ebound {

std::optional<double> try_evaluate(const FunctionHandle& f, std::span<const double> x);

/// Classical gradient where f is smooth, otherwise the min-norm element of
/// the subdifferential hull. Empty at domain singularities.
std::optional<Vec> descent_direction(const FunctionHandle& f, std::span<const double> x,
                                     double tie_tol = default_tie_tol);

struct LevelSolveOptions {
    int max_iters = 100;
    double ball_radius = 0.0;  // > 0: iterates are kept inside the ball
};

/// Damped Newton iteration on f(y) = target along the gradient,
/// y <- y - (f(y) - target) g / |g|^2, backtracking until |f - target|
/// decreases. Returns the first iterate accepted by `done`; empty when the
/// residual stops halving within 16 steps or the iteration budget runs out.
std::optional<Point> solve_level(const FunctionHandle& f, Point y, double target,
                                 const std::function<bool(double)>& done,
                                 const LevelSolveOptions& opts = {});

/// Objective returning its value and writing its gradient; empty means the
/// point is outside the domain.
using SmoothObjective = std::function<std::optional<double>(std::span<const double>, Vec&)>;

struct MinimizeResult {
    Point x;
    double value = 0.0;
    int iters = 0;
};

/// BFGS with Armijo backtracking.
MinimizeResult bfgs_minimize(const SmoothObjective& fn, Point x0, int max_iters,
                             double armijo = 1e-4, double shrink = 0.5);

double distance(std::span<const double> a, std::span<const double> b);

}  // namespace ebound
