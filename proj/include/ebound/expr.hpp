#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ebound {

using Point = std::vector<double>;
using Vec = std::vector<double>;

enum class Op { constant, variable, add, sub, mul, div, powi, sqrt, abs, max, min };

std::string_view op_name(Op op);

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// One node of a semialgebraic expression tree. The grammar is closed: only
/// the kinds in `Op` exist, so every tree denotes a semialgebraic function.
struct Node {
    Op op = Op::constant;
    double value = 0.0;  // constant
    int index = 0;       // variable
    int exponent = 0;    // powi
    std::vector<NodePtr> args;
};

/// Value-semantic handle used to assemble trees in code.
class Expr {
public:
    Expr(double c);  // NOLINT: implicit constants read naturally in formulas
    explicit Expr(NodePtr node) : node_(std::move(node)) {}

    const NodePtr& node() const noexcept { return node_; }

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);

private:
    NodePtr node_;
};

Expr var(int index);
Expr constant(double value);
Expr powi(const Expr& base, int exponent);
Expr sqrt(const Expr& e);
Expr abs(const Expr& e);
Expr max(const Expr& a, const Expr& b);
Expr min(const Expr& a, const Expr& b);

/// A function f: R^arity -> R.
class FunctionHandle {
public:
    FunctionHandle(NodePtr root, int arity, std::string name);
    FunctionHandle(const Expr& e, int arity, std::string name)
        : FunctionHandle(e.node(), arity, std::move(name)) {}

    const NodePtr& root() const noexcept { return root_; }
    int arity() const noexcept { return arity_; }
    const std::string& name() const noexcept { return name_; }

    /// Same tree multiplied by `factor`, named `name`.
    FunctionHandle scaled(double factor, std::string name) const;

private:
    NodePtr root_;
    int arity_;
    std::string name_;
};

/// Infix form of a subtree, used in diagnostics and report echoes.
std::string to_infix(const Node& node);

// --- parsing -------------------------------------------------------------

/// Parses the JSON function-spec document
/// `{"name": ..., "arity": n, "root": {"op": ..., "args": [...]}}`.
/// An `"expr"` field holding infix text may replace `"root"`.
FunctionHandle parse_function(std::string_view spec_text);

/// Parses infix text such as `x0/(1+x0^2)` or `max(x0, -x0)`. When `arity`
/// is 0 it is inferred as one past the largest variable index.
FunctionHandle parse_infix(std::string_view text, int arity = 0, std::string name = "f");

/// Serialises a handle back to the JSON function-spec format.
std::string to_spec_json(const FunctionHandle& f);

// --- evaluation and differentiation -------------------------------------

double evaluate(const FunctionHandle& f, std::span<const double> x);

inline constexpr double default_tie_tol = 1e-9;
inline constexpr std::size_t default_selection_cap = 256;

/// Exact gradient of a smooth point. Throws NonsmoothError when a max, min or
/// abs node is tied within `tie_tol` and DomainError at singularities.
Vec gradient(const FunctionHandle& f, std::span<const double> x,
             double tie_tol = default_tie_tol);

/// Convex hull of the gradients of every smooth branch selection active at x.
struct SubdiffHull {
    std::vector<Vec> generators;
    double tie_tol = default_tie_tol;
    double value = 0.0;  // f(x)
};

SubdiffHull subdiff_generators(const FunctionHandle& f, std::span<const double> x,
                               double tie_tol = default_tie_tol,
                               std::size_t cap = default_selection_cap);

struct MinNormResult {
    Vec point;
    double norm = 0.0;
    std::vector<double> weights;  // convex weights over the hull generators
};

/// Minimum-norm element of conv(generators), by Wolfe's active-set method.
MinNormResult min_norm_point(const SubdiffHull& hull);
MinNormResult min_norm_point(std::span<const Vec> generators);

/// m_f(x): smallest norm over the generated subdifferential hull.
double nonsmooth_slope(const FunctionHandle& f, std::span<const double> x,
                       double tie_tol = default_tie_tol);

struct StrongSlopeOptions {
    std::vector<double> h_schedule{1e-3, 1e-4, 1e-5};
    bool extrapolate = true;  // Richardson over h, 2h, 4h where the quotients look smooth
    int dirs_per_h = 0;  // 0: 2n + 8
    std::uint64_t seed = 0x5eed;
    double tie_tol = default_tie_tol;
};

/// Sampled strong slope sup_h [f(x) - f(x+h)]_+ / |h| at the smallest usable
/// step. Probes hit by a domain error are skipped. With `extrapolate`, each
/// direction's quotient is corrected by one Richardson step when the quotients
/// at h, 2h and 4h shrink like a smooth expansion; near a kink the plain
/// quotient at h is kept.
double strong_slope_estimate(const FunctionHandle& f, std::span<const double> x,
                             const StrongSlopeOptions& opts = {});

struct SlopeEstimate {
    double m_f = 0.0;
    double strong = 0.0;
    bool smooth = false;
    double grad_norm = 0.0;  // meaningful when smooth
};

SlopeEstimate estimate_slopes(const FunctionHandle& f, std::span<const double> x,
                              const StrongSlopeOptions& opts = {});

double norm(std::span<const double> v);

}  // namespace ebound
