#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ebound/expr.hpp"

namespace ebound {

struct SamplerConfig {
    std::uint64_t seed = 20240607;
    int multistart_count = 32;
    int max_iters = 200;
    double penalty_weight = 10.0;  // first-round exterior penalty weight
    double penalty_growth = 10.0;  // weight multiplier per round
    int penalty_rounds = 4;
    double armijo = 1e-4;
    double backtrack = 0.5;
    double box_half_width = 0.0;  // <= 0: 8 (1 + |x|)
    int threads = 0;              // 0: hardware concurrency
};

/// Feasible points of S found ahead of time. Stored coordinate-major for the
/// nearest-point kernel.
class AnchorSet {
public:
    AnchorSet() = default;
    explicit AnchorSet(std::vector<Point> points);

    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }
    const std::vector<Point>& points() const noexcept { return points_; }

    /// Index of the anchor nearest to `x` and its distance.
    std::pair<std::size_t, double> nearest(std::span<const double> x) const;

    /// Indices of up to `k` nearest anchors, nearest first.
    std::vector<std::size_t> nearest_k(std::span<const double> x, std::size_t k) const;

private:
    std::vector<Point> points_;
    std::vector<double> coords_;
};

/// S = {x : f(x) <= member_tol}.
struct SublevelSet {
    FunctionHandle f;
    double member_tol = 0.0;
    std::shared_ptr<const AnchorSet> anchors;
};

bool member(const SublevelSet& s, std::span<const double> x);

/// Multistart search for feasible points inside the ball of `radius`.
AnchorSet find_anchors(const FunctionHandle& f, double member_tol, double radius,
                       const SamplerConfig& cfg, std::size_t cap = 64);

/// Sublevel set with anchors searched up to `radius`.
SublevelSet make_sublevel(const FunctionHandle& f, double member_tol, double radius,
                          const SamplerConfig& cfg);

struct ProjectionResult {
    Point projected;
    double dist = 0.0;  // upper bound on d(x, S)
    bool converged = false;
    int starts_used = 0;
};

/// Upper bound on d(x, S) from multistart penalised projection. Every start
/// ends with a feasibility polish, so `projected` is always in S when
/// `converged` is set.
ProjectionResult distance_to_sublevel(const SublevelSet& s, std::span<const double> x,
                                      const SamplerConfig& cfg);

}  // namespace ebound
