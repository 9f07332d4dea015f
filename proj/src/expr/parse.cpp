#include <cctype>
#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ebound/errors.hpp"
#include "ebound/expr.hpp"

namespace ebound {

using nlohmann::json;

namespace {

NodePtr make(Op op, std::vector<NodePtr> args) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = std::move(args);
    return n;
}

// Recursive-descent parser for the infix convenience syntax.
class InfixParser {
public:
    explicit InfixParser(std::string_view text) : s_(text) {}

    NodePtr parse() {
        skip();
        if (pos_ >= s_.size()) throw ParseError("empty expression", pos_);
        NodePtr e = expression();
        skip();
        if (pos_ < s_.size()) throw ParseError("unexpected character '" + std::string(1, s_[pos_]) + "'", pos_);
        return e;
    }

    int max_index() const { return max_index_; }

private:
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip();
        return pos_ < s_.size() && s_[pos_] == c;
    }

    // Operand after a binary or unary operator at `op_pos`; a missing operand
    // is reported at the operator.
    NodePtr operand(std::size_t op_pos, NodePtr (InfixParser::*rule)()) {
        skip();
        if (pos_ >= s_.size() || s_[pos_] == ')' || s_[pos_] == ',')
            throw ParseError("dangling operator '" + std::string(1, s_[op_pos]) + "'", op_pos);
        return (this->*rule)();
    }

    NodePtr expression() {
        NodePtr lhs = term();
        while (peek('+') || peek('-')) {
            std::size_t at = pos_;
            char c = s_[pos_++];
            NodePtr rhs = operand(at, &InfixParser::term);
            lhs = make(c == '+' ? Op::add : Op::sub, {lhs, rhs});
        }
        return lhs;
    }

    NodePtr term() {
        NodePtr lhs = unary();
        while (peek('*') || peek('/')) {
            std::size_t at = pos_;
            char c = s_[pos_++];
            NodePtr rhs = operand(at, &InfixParser::unary);
            lhs = make(c == '*' ? Op::mul : Op::div, {lhs, rhs});
        }
        return lhs;
    }

    NodePtr unary() {
        if (peek('-')) {
            std::size_t at = pos_++;
            return make(Op::sub, {operand(at, &InfixParser::unary)});
        }
        if (peek('+')) {
            std::size_t at = pos_++;
            return operand(at, &InfixParser::unary);
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (!peek('^')) return base;
        std::size_t at = pos_++;
        skip();
        bool neg = false;
        if (pos_ < s_.size() && s_[pos_] == '-') {
            neg = true;
            ++pos_;
        } else if (pos_ < s_.size() && s_[pos_] == '(') {
            // x^(-2)
            ++pos_;
            skip();
            if (pos_ < s_.size() && s_[pos_] == '-') {
                neg = true;
                ++pos_;
            }
            int e = integer(at);
            skip();
            if (!peek(')')) throw ParseError("expected ')' after exponent", pos_);
            ++pos_;
            return make_pow(base, neg ? -e : e);
        }
        int e = integer(at);
        return make_pow(base, neg ? -e : e);
    }

    static NodePtr make_pow(NodePtr base, int e) {
        auto n = std::make_shared<Node>();
        n->op = Op::powi;
        n->exponent = e;
        n->args = {std::move(base)};
        return n;
    }

    int integer(std::size_t op_pos) {
        skip();
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) throw ParseError("exponent must be an integer literal", start < s_.size() ? start : op_pos);
        int v = 0;
        auto [p, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (ec != std::errc()) throw ParseError("exponent out of range", start);
        (void)p;
        return v;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
        char c = s_[pos_];
        if (c == '(') {
            std::size_t open = pos_++;
            NodePtr e = expression();
            if (!peek(')')) throw ParseError("unbalanced '('", open);
            ++pos_;
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
    }

    NodePtr number() {
        std::size_t start = pos_;
        double v = 0.0;
        auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (ec != std::errc()) throw ParseError("malformed number", start);
        pos_ = static_cast<std::size_t>(p - s_.data());
        return constant(v).node();
    }

    NodePtr identifier() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        std::string_view id = s_.substr(start, pos_ - start);
        if (id.size() >= 2 && id[0] == 'x' &&
            id.find_first_not_of("0123456789", 1) == std::string_view::npos) {
            int idx = 0;
            std::from_chars(id.data() + 1, id.data() + id.size(), idx);
            max_index_ = std::max(max_index_, idx);
            return var(idx).node();
        }
        Op op;
        if (id == "sqrt") op = Op::sqrt;
        else if (id == "abs") op = Op::abs;
        else if (id == "max") op = Op::max;
        else if (id == "min") op = Op::min;
        else throw ParseError("unknown identifier '" + std::string(id) + "'", start);

        if (!peek('(')) throw ParseError("expected '(' after " + std::string(id), pos_);
        std::size_t open = pos_++;
        std::vector<NodePtr> args{expression()};
        while (peek(',')) {
            std::size_t at = pos_++;
            args.push_back(operand(at, &InfixParser::expression));
        }
        if (!peek(')')) throw ParseError("unbalanced '('", open);
        ++pos_;
        bool unary_op = op == Op::sqrt || op == Op::abs;
        if (unary_op && args.size() != 1)
            throw ParseError(std::string(id) + " takes one argument", start);
        if (!unary_op && args.size() < 2)
            throw ParseError(std::string(id) + " takes at least two arguments", start);
        return make(op, std::move(args));
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int max_index_ = -1;
};

Op op_from_name(const std::string& name) {
    static const std::pair<const char*, Op> table[] = {
        {"const", Op::constant}, {"var", Op::variable}, {"add", Op::add}, {"sub", Op::sub},
        {"mul", Op::mul},        {"div", Op::div},      {"powi", Op::powi}, {"sqrt", Op::sqrt},
        {"abs", Op::abs},        {"max", Op::max},      {"min", Op::min}};
    for (const auto& [n, op] : table)
        if (name == n) return op;
    throw ParseError("unknown operator '" + name + "'", 0);
}

NodePtr node_from_json(const json& j) {
    if (!j.is_object() || !j.contains("op") || !j["op"].is_string())
        throw ParseError("node must be an object with a string 'op'", 0);
    Op op = op_from_name(j["op"].get<std::string>());
    auto n = std::make_shared<Node>();
    n->op = op;
    if (op == Op::constant) {
        if (!j.contains("value") || !j["value"].is_number())
            throw ParseError("const node requires numeric 'value'", 0);
        n->value = j["value"].get<double>();
        return n;
    }
    if (op == Op::variable) {
        if (!j.contains("index") || !j["index"].is_number_integer())
            throw ParseError("var node requires integer 'index'", 0);
        n->index = j["index"].get<int>();
        return n;
    }
    if (!j.contains("args") || !j["args"].is_array())
        throw ParseError(std::string(op_name(op)) + " node requires 'args' array", 0);
    for (const auto& a : j["args"]) n->args.push_back(node_from_json(a));
    std::size_t k = n->args.size();
    bool ok = true;
    switch (op) {
        case Op::add:
        case Op::mul:
        case Op::max:
        case Op::min: ok = k >= 2; break;
        case Op::sub: ok = k == 1 || k == 2; break;
        case Op::div: ok = k == 2; break;
        case Op::powi:
        case Op::sqrt:
        case Op::abs: ok = k == 1; break;
        default: break;
    }
    if (!ok) throw ParseError(std::string(op_name(op)) + " node has wrong number of args", 0);
    if (op == Op::powi) {
        if (!j.contains("exponent") || !j["exponent"].is_number_integer())
            throw ParseError("powi node requires integer 'exponent'", 0);
        n->exponent = j["exponent"].get<int>();
    }
    return n;
}

json node_to_json(const Node& n) {
    json j;
    j["op"] = std::string(op_name(n.op));
    if (n.op == Op::constant) {
        j["value"] = n.value;
        return j;
    }
    if (n.op == Op::variable) {
        j["index"] = n.index;
        return j;
    }
    json args = json::array();
    for (const auto& a : n.args) args.push_back(node_to_json(*a));
    j["args"] = std::move(args);
    if (n.op == Op::powi) j["exponent"] = n.exponent;
    return j;
}

}  // namespace

FunctionHandle parse_infix(std::string_view text, int arity, std::string name) {
    InfixParser p(text);
    NodePtr root = p.parse();
    int inferred = p.max_index() + 1;
    if (arity == 0) arity = std::max(inferred, 1);
    if (inferred > arity)
        throw ArityError("expression uses x" + std::to_string(inferred - 1) +
                         " but arity is " + std::to_string(arity));
    return FunctionHandle(std::move(root), arity, std::move(name));
}

FunctionHandle parse_function(std::string_view spec_text) {
    json j;
    try {
        j = json::parse(spec_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(),
                         e.byte > 0 ? static_cast<std::size_t>(e.byte - 1) : 0);
    }
    if (!j.is_object()) throw ParseError("function spec must be a JSON object", 0);
    std::string name = j.value("name", std::string("f"));
    int arity = 0;
    if (j.contains("arity")) {
        if (!j["arity"].is_number_integer()) throw ParseError("'arity' must be an integer", 0);
        arity = j["arity"].get<int>();
        if (arity <= 0) throw ArityError("arity must be positive");
    }
    if (j.contains("root")) {
        if (arity == 0) throw ParseError("'arity' is required with 'root'", 0);
        return FunctionHandle(node_from_json(j["root"]), arity, std::move(name));
    }
    if (j.contains("expr") && j["expr"].is_string())
        return parse_infix(j["expr"].get<std::string>(), arity, std::move(name));
    throw ParseError("function spec needs 'root' or 'expr'", 0);
}

std::string to_spec_json(const FunctionHandle& f) {
    json j;
    j["name"] = f.name();
    j["arity"] = f.arity();
    j["root"] = node_to_json(*f.root());
    return j.dump();
}

}  // namespace ebound
