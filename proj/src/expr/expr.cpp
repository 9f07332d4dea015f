#include "ebound/expr.hpp"

#include <charconv>
#include <cmath>

#include "ebound/errors.hpp"

namespace ebound {

std::string_view op_name(Op op) {
    switch (op) {
        case Op::constant: return "const";
        case Op::variable: return "var";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::div: return "div";
        case Op::powi: return "powi";
        case Op::sqrt: return "sqrt";
        case Op::abs: return "abs";
        case Op::max: return "max";
        case Op::min: return "min";
    }
    return "?";
}

namespace {

NodePtr make(Op op, std::vector<NodePtr> args) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = std::move(args);
    return n;
}

void check_vars(const Node& n, int arity) {
    if (n.op == Op::variable && (n.index < 0 || n.index >= arity)) {
        throw ArityError("variable x" + std::to_string(n.index) + " outside arity " +
                         std::to_string(arity));
    }
    for (const auto& a : n.args) check_vars(*a, arity);
}

std::string number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

int precedence(const Node& n) {
    switch (n.op) {
        case Op::add:
        case Op::sub: return n.args.size() == 1 ? 3 : 1;
        case Op::mul:
        case Op::div: return 2;
        case Op::powi: return 4;
        case Op::constant: return n.value < 0 ? 3 : 5;
        default: return 5;
    }
}

std::string wrap(const Node& child, int min_prec) {
    std::string s = to_infix(child);
    return precedence(child) < min_prec ? "(" + s + ")" : s;
}

}  // namespace

std::string to_infix(const Node& n) {
    switch (n.op) {
        case Op::constant: return number(n.value);
        case Op::variable: return "x" + std::to_string(n.index);
        case Op::add: {
            std::string s = wrap(*n.args[0], 1);
            for (std::size_t i = 1; i < n.args.size(); ++i) s += " + " + wrap(*n.args[i], 1);
            return s;
        }
        case Op::sub:
            if (n.args.size() == 1) return "-" + wrap(*n.args[0], 4);
            return wrap(*n.args[0], 1) + " - " + wrap(*n.args[1], 2);
        case Op::mul: {
            std::string s = wrap(*n.args[0], 2);
            for (std::size_t i = 1; i < n.args.size(); ++i) s += "*" + wrap(*n.args[i], 3);
            return s;
        }
        case Op::div: return wrap(*n.args[0], 2) + "/" + wrap(*n.args[1], 3);
        case Op::powi: {
            std::string e = std::to_string(n.exponent);
            if (n.exponent < 0) e = "(" + e + ")";
            return wrap(*n.args[0], 5) + "^" + e;
        }
        case Op::sqrt:
        case Op::abs:
        case Op::max:
        case Op::min: {
            std::string s(op_name(n.op));
            s += "(";
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) s += ", ";
                s += to_infix(*n.args[i]);
            }
            return s + ")";
        }
    }
    return "?";
}

Expr::Expr(double c) : node_(constant(c).node()) {}

Expr operator+(const Expr& a, const Expr& b) { return Expr(make(Op::add, {a.node(), b.node()})); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(make(Op::sub, {a.node(), b.node()})); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(make(Op::mul, {a.node(), b.node()})); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(make(Op::div, {a.node(), b.node()})); }
Expr operator-(const Expr& a) { return Expr(make(Op::sub, {a.node()})); }

Expr var(int index) {
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->index = index;
    return Expr(NodePtr(std::move(n)));
}

Expr constant(double value) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = value;
    return Expr(NodePtr(std::move(n)));
}

Expr powi(const Expr& base, int exponent) {
    auto n = std::make_shared<Node>();
    n->op = Op::powi;
    n->exponent = exponent;
    n->args = {base.node()};
    return Expr(NodePtr(std::move(n)));
}

Expr sqrt(const Expr& e) { return Expr(make(Op::sqrt, {e.node()})); }
Expr abs(const Expr& e) { return Expr(make(Op::abs, {e.node()})); }
Expr max(const Expr& a, const Expr& b) { return Expr(make(Op::max, {a.node(), b.node()})); }
Expr min(const Expr& a, const Expr& b) { return Expr(make(Op::min, {a.node(), b.node()})); }

FunctionHandle::FunctionHandle(NodePtr root, int arity, std::string name)
    : root_(std::move(root)), arity_(arity), name_(std::move(name)) {
    if (!root_) throw ArityError("function has no root expression");
    if (arity_ <= 0) throw ArityError("arity must be positive, got " + std::to_string(arity_));
    check_vars(*root_, arity_);
}

FunctionHandle FunctionHandle::scaled(double factor, std::string name) const {
    return FunctionHandle(make(Op::mul, {constant(factor).node(), root_}), arity_,
                          std::move(name));
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

}  // namespace ebound
