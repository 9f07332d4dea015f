#include <algorithm>
#include <cmath>

#include "ebound/errors.hpp"
#include "ebound/expr.hpp"

namespace ebound {

namespace {

// b^e by repeated squaring.
double ipow(double b, int e) {
    unsigned k = e < 0 ? static_cast<unsigned>(-static_cast<long>(e)) : static_cast<unsigned>(e);
    double r = 1.0, sq = b;
    while (k) {
        if (k & 1u) r *= sq;
        k >>= 1u;
        if (k) sq *= sq;
    }
    return e < 0 ? 1.0 / r : r;
}

double eval(const Node& n, std::span<const double> x) {
    switch (n.op) {
        case Op::constant: return n.value;
        case Op::variable: return x[static_cast<std::size_t>(n.index)];
        case Op::add: {
            double s = 0.0;
            for (const auto& a : n.args) s += eval(*a, x);
            return s;
        }
        case Op::sub:
            if (n.args.size() == 1) return -eval(*n.args[0], x);
            return eval(*n.args[0], x) - eval(*n.args[1], x);
        case Op::mul: {
            double p = 1.0;
            for (const auto& a : n.args) p *= eval(*a, x);
            return p;
        }
        case Op::div: {
            double num = eval(*n.args[0], x);
            double den = eval(*n.args[1], x);
            if (den == 0.0) throw DomainError("division by zero", to_infix(n));
            return num / den;
        }
        case Op::powi: {
            double b = eval(*n.args[0], x);
            if (n.exponent < 0 && b == 0.0) throw DomainError("negative power of zero", to_infix(n));
            return ipow(b, n.exponent);
        }
        case Op::sqrt: {
            double u = eval(*n.args[0], x);
            if (u < 0.0) throw DomainError("square root of negative value", to_infix(n));
            return std::sqrt(u);
        }
        case Op::abs: return std::fabs(eval(*n.args[0], x));
        case Op::max: {
            double m = eval(*n.args[0], x);
            for (std::size_t i = 1; i < n.args.size(); ++i) m = std::max(m, eval(*n.args[i], x));
            return m;
        }
        case Op::min: {
            double m = eval(*n.args[0], x);
            for (std::size_t i = 1; i < n.args.size(); ++i) m = std::min(m, eval(*n.args[i], x));
            return m;
        }
    }
    return 0.0;
}

// Value plus the gradients of all active smooth branch selections.
struct Branches {
    double value = 0.0;
    std::vector<Vec> grads;
};

struct Walker {
    std::span<const double> x;
    double tie_tol;
    std::size_t cap;
    bool smooth_only;

    std::size_t dim() const { return x.size(); }

    void dedupe(std::vector<Vec>& g) const {
        if (g.size() < 2) return;
        std::sort(g.begin(), g.end());
        g.erase(std::unique(g.begin(), g.end()), g.end());
    }

    void guard(std::size_t count) const {
        if (count > cap)
            throw SelectionCapError("active branch selections (" + std::to_string(count) +
                                    ") exceed cap " + std::to_string(cap));
    }

    // Every combination of one gradient per child, merged by `combine`.
    template <class Combine>
    std::vector<Vec> product(const std::vector<Branches>& kids, Combine combine) const {
        std::size_t total = 1;
        for (const auto& k : kids) {
            total *= k.grads.size();
            guard(total);
        }
        std::vector<Vec> out;
        out.reserve(total);
        std::vector<std::size_t> pick(kids.size(), 0);
        std::vector<const Vec*> chosen(kids.size());
        for (std::size_t c = 0; c < total; ++c) {
            for (std::size_t i = 0; i < kids.size(); ++i) chosen[i] = &kids[i].grads[pick[i]];
            out.push_back(combine(chosen));
            for (std::size_t i = kids.size(); i-- > 0;) {
                if (++pick[i] < kids[i].grads.size()) break;
                pick[i] = 0;
            }
        }
        dedupe(out);
        return out;
    }

    bool tied(double a, double b) const {
        return std::fabs(a - b) <= tie_tol * std::max(std::fabs(a), std::fabs(b));
    }

    Branches walk(const Node& n) const {
        Branches r;
        switch (n.op) {
            case Op::constant:
                r.value = n.value;
                r.grads = {Vec(dim(), 0.0)};
                return r;
            case Op::variable: {
                r.value = x[static_cast<std::size_t>(n.index)];
                Vec g(dim(), 0.0);
                g[static_cast<std::size_t>(n.index)] = 1.0;
                r.grads = {std::move(g)};
                return r;
            }
            default: break;
        }

        std::vector<Branches> kids;
        kids.reserve(n.args.size());
        for (const auto& a : n.args) kids.push_back(walk(*a));

        switch (n.op) {
            case Op::add: {
                for (const auto& k : kids) r.value += k.value;
                r.grads = product(kids, [&](const std::vector<const Vec*>& gs) {
                    Vec g(dim(), 0.0);
                    for (const Vec* v : gs)
                        for (std::size_t j = 0; j < g.size(); ++j) g[j] += (*v)[j];
                    return g;
                });
                return r;
            }
            case Op::sub: {
                if (kids.size() == 1) {
                    r.value = -kids[0].value;
                    r.grads = kids[0].grads;
                    for (auto& g : r.grads)
                        for (double& c : g) c = -c;
                    return r;
                }
                r.value = kids[0].value - kids[1].value;
                r.grads = product(kids, [&](const std::vector<const Vec*>& gs) {
                    Vec g(dim());
                    for (std::size_t j = 0; j < g.size(); ++j) g[j] = (*gs[0])[j] - (*gs[1])[j];
                    return g;
                });
                return r;
            }
            case Op::mul: {
                std::size_t k = kids.size();
                // Products of all factors except i, without dividing.
                std::vector<double> prefix(k + 1, 1.0), suffix(k + 1, 1.0);
                for (std::size_t i = 0; i < k; ++i) prefix[i + 1] = prefix[i] * kids[i].value;
                for (std::size_t i = k; i-- > 0;) suffix[i] = suffix[i + 1] * kids[i].value;
                r.value = prefix[k];
                r.grads = product(kids, [&](const std::vector<const Vec*>& gs) {
                    Vec g(dim(), 0.0);
                    for (std::size_t i = 0; i < k; ++i) {
                        double w = prefix[i] * suffix[i + 1];
                        for (std::size_t j = 0; j < g.size(); ++j) g[j] += w * (*gs[i])[j];
                    }
                    return g;
                });
                return r;
            }
            case Op::div: {
                double a = kids[0].value, b = kids[1].value;
                if (b == 0.0) throw DomainError("division by zero", to_infix(n));
                r.value = a / b;
                double b2 = b * b;
                r.grads = product(kids, [&](const std::vector<const Vec*>& gs) {
                    Vec g(dim());
                    for (std::size_t j = 0; j < g.size(); ++j)
                        g[j] = ((*gs[0])[j] * b - a * (*gs[1])[j]) / b2;
                    return g;
                });
                return r;
            }
            case Op::powi: {
                double b = kids[0].value;
                int e = n.exponent;
                if (e < 0 && b == 0.0) throw DomainError("negative power of zero", to_infix(n));
                r.value = ipow(b, e);
                double d = e == 0 ? 0.0 : e * ipow(b, e - 1);
                r.grads = std::move(kids[0].grads);
                for (auto& g : r.grads)
                    for (double& c : g) c *= d;
                dedupe(r.grads);
                return r;
            }
            case Op::sqrt: {
                double u = kids[0].value;
                if (u < 0.0) throw DomainError("square root of negative value", to_infix(n));
                if (u == 0.0) throw DomainError("square root is not differentiable at zero", to_infix(n));
                r.value = std::sqrt(u);
                double d = 0.5 / r.value;
                r.grads = std::move(kids[0].grads);
                for (auto& g : r.grads)
                    for (double& c : g) c *= d;
                return r;
            }
            case Op::abs: {
                double u = kids[0].value;
                r.value = std::fabs(u);
                if (u != 0.0) {
                    double s = u > 0.0 ? 1.0 : -1.0;
                    r.grads = std::move(kids[0].grads);
                    for (auto& g : r.grads)
                        for (double& c : g) c *= s;
                    return r;
                }
                if (smooth_only) throw NonsmoothError(to_infix(n));
                for (const auto& g : kids[0].grads) {
                    r.grads.push_back(g);
                    Vec neg = g;
                    for (double& c : neg) c = -c;
                    r.grads.push_back(std::move(neg));
                }
                guard(r.grads.size());
                dedupe(r.grads);
                return r;
            }
            case Op::max:
            case Op::min: {
                bool is_max = n.op == Op::max;
                double best = kids[0].value;
                for (const auto& k : kids)
                    best = is_max ? std::max(best, k.value) : std::min(best, k.value);
                r.value = best;
                std::size_t active = 0;
                for (const auto& k : kids) {
                    if (!tied(k.value, best)) continue;
                    ++active;
                    if (smooth_only && active > 1) throw NonsmoothError(to_infix(n));
                    r.grads.insert(r.grads.end(), k.grads.begin(), k.grads.end());
                }
                guard(r.grads.size());
                dedupe(r.grads);
                return r;
            }
            default: break;
        }
        return r;
    }
};

// Reverse-mode gradient for points where every kink is resolved. Raises the
// same errors as Walker in smooth_only mode.
class Tape {
public:
    void reset(std::span<const double> x, double tie_tol) {
        x_ = x;
        tie_tol_ = tie_tol;
    }

    Vec gradient(const Node& root) {
        entries_.clear();
        kids_.clear();
        stack_.clear();
        record(root);
        adj_.assign(entries_.size(), 0.0);
        auto& adj = adj_;
        adj.back() = 1.0;
        Vec g(x_.size(), 0.0);
        for (std::size_t e = entries_.size(); e-- > 0;) {
            const double a = adj[e];
            if (a == 0.0) continue;
            const Entry& en = entries_[e];
            const Node& n = *en.node;
            const std::size_t* k = kids_.data() + en.first;
            auto cv = [&](std::size_t i) { return entries_[k[i]].value; };
            switch (n.op) {
                case Op::constant: break;
                case Op::variable: g[static_cast<std::size_t>(n.index)] += a; break;
                case Op::add:
                    for (std::size_t i = 0; i < en.count; ++i) adj[k[i]] += a;
                    break;
                case Op::sub:
                    if (en.count == 1) {
                        adj[k[0]] -= a;
                    } else {
                        adj[k[0]] += a;
                        adj[k[1]] -= a;
                    }
                    break;
                case Op::mul:
                    for (std::size_t i = 0; i < en.count; ++i) {
                        double w = 1.0;
                        for (std::size_t j = 0; j < en.count; ++j)
                            if (j != i) w *= cv(j);
                        adj[k[i]] += a * w;
                    }
                    break;
                case Op::div: {
                    double b = cv(1);
                    adj[k[0]] += a / b;
                    adj[k[1]] -= a * cv(0) / (b * b);
                    break;
                }
                case Op::powi:
                    if (n.exponent != 0) adj[k[0]] += a * n.exponent * ipow(cv(0), n.exponent - 1);
                    break;
                case Op::sqrt: adj[k[0]] += a * 0.5 / en.value; break;
                case Op::abs: adj[k[0]] += cv(0) > 0.0 ? a : -a; break;
                case Op::max:
                case Op::min: adj[k[en.winner]] += a; break;
            }
        }
        return g;
    }

private:
    struct Entry {
        const Node* node;
        double value;
        std::size_t first, count, winner;
    };

    std::size_t record(const Node& n) {
        const std::size_t base = stack_.size();
        for (const auto& a : n.args) stack_.push_back(record(*a));
        Entry en{&n, 0.0, kids_.size(), n.args.size(), 0};
        kids_.insert(kids_.end(), stack_.begin() + static_cast<std::ptrdiff_t>(base), stack_.end());
        stack_.resize(base);
        const std::size_t* k = kids_.data() + en.first;
        auto cv = [&](std::size_t i) { return entries_[k[i]].value; };
        switch (n.op) {
            case Op::constant: en.value = n.value; break;
            case Op::variable: en.value = x_[static_cast<std::size_t>(n.index)]; break;
            case Op::add:
                for (std::size_t i = 0; i < en.count; ++i) en.value += cv(i);
                break;
            case Op::sub: en.value = en.count == 1 ? -cv(0) : cv(0) - cv(1); break;
            case Op::mul: {
                double p = 1.0;
                for (std::size_t i = 0; i < en.count; ++i) p *= cv(i);
                en.value = p;
                break;
            }
            case Op::div:
                if (cv(1) == 0.0) throw DomainError("division by zero", to_infix(n));
                en.value = cv(0) / cv(1);
                break;
            case Op::powi:
                if (n.exponent < 0 && cv(0) == 0.0) throw DomainError("negative power of zero", to_infix(n));
                en.value = ipow(cv(0), n.exponent);
                break;
            case Op::sqrt:
                if (cv(0) < 0.0) throw DomainError("square root of negative value", to_infix(n));
                if (cv(0) == 0.0) throw DomainError("square root is not differentiable at zero", to_infix(n));
                en.value = std::sqrt(cv(0));
                break;
            case Op::abs:
                if (cv(0) == 0.0) throw NonsmoothError(to_infix(n));
                en.value = std::fabs(cv(0));
                break;
            case Op::max:
            case Op::min: {
                const bool is_max = n.op == Op::max;
                double best = cv(0);
                for (std::size_t i = 1; i < en.count; ++i)
                    best = is_max ? std::max(best, cv(i)) : std::min(best, cv(i));
                std::size_t active = 0;
                for (std::size_t i = 0; i < en.count; ++i) {
                    if (std::fabs(cv(i) - best) > tie_tol_ * std::max(std::fabs(cv(i)), std::fabs(best))) continue;
                    if (++active > 1) throw NonsmoothError(to_infix(n));
                    en.winner = i;
                }
                en.value = best;
                break;
            }
        }
        entries_.push_back(en);
        return entries_.size() - 1;
    }

    std::span<const double> x_;
    double tie_tol_ = 0.0;
    std::vector<double> adj_;
    std::vector<Entry> entries_;
    std::vector<std::size_t> kids_;
    std::vector<std::size_t> stack_;
};

void check_point(const FunctionHandle& f, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(f.arity()))
        throw ArityError("point has " + std::to_string(x.size()) + " coordinates, function arity is " +
                         std::to_string(f.arity()));
}

}  // namespace

double evaluate(const FunctionHandle& f, std::span<const double> x) {
    check_point(f, x);
    return eval(*f.root(), x);
}

Vec gradient(const FunctionHandle& f, std::span<const double> x, double tie_tol) {
    check_point(f, x);
    thread_local Tape tape;
    tape.reset(x, tie_tol);
    return tape.gradient(*f.root());
}

SubdiffHull subdiff_generators(const FunctionHandle& f, std::span<const double> x, double tie_tol,
                               std::size_t cap) {
    check_point(f, x);
    Walker w{x, tie_tol, cap, false};
    Branches b = w.walk(*f.root());
    return SubdiffHull{std::move(b.grads), tie_tol, b.value};
}

double nonsmooth_slope(const FunctionHandle& f, std::span<const double> x, double tie_tol) {
    return min_norm_point(subdiff_generators(f, x, tie_tol)).norm;
}

}  // namespace ebound
