#pragma once

// Small expression catalogue for data functions: constants, variables, sums,
// products, polynomials, sin/cos/exp, reciprocal, integer powers and the C2
// smoothstep.  Expressions are immutable trees with symbolic differentiation.

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace thinnet {

enum class Var { s = 0, y, t, x1, x2, x3 };

struct Vars {
    double s = 0.0;
    double y = 0.0;
    double t = 0.0;
    std::array<double, 3> x{0.0, 0.0, 0.0};

    double get(Var v) const {
        switch (v) {
            case Var::s: return s;
            case Var::y: return y;
            case Var::t: return t;
            case Var::x1: return x[0];
            case Var::x2: return x[1];
            case Var::x3: return x[2];
        }
        return 0.0;
    }
};

inline Var parse_var(const std::string& name) {
    if (name == "s") return Var::s;
    if (name == "y") return Var::y;
    if (name == "t") return Var::t;
    if (name == "x1") return Var::x1;
    if (name == "x2") return Var::x2;
    if (name == "x3") return Var::x3;
    throw ConfigError("unknown variable '" + name + "'");
}

// C2 quintic smoothstep on [0,1] and its derivatives.
inline double smoothstep(double z, int order = 0) {
    if (z <= 0.0 || z >= 1.0) {
        if (order == 0) return z <= 0.0 ? 0.0 : 1.0;
        return 0.0;
    }
    switch (order) {
        case 0: return z * z * z * (z * (6.0 * z - 15.0) + 10.0);
        case 1: return 30.0 * z * z * (1.0 - z) * (1.0 - z);
        case 2: return 60.0 * z * (1.0 - z) * (1.0 - 2.0 * z);
        case 3: return 60.0 * (1.0 - 6.0 * z + 6.0 * z * z);
        case 4: return 60.0 * (12.0 * z - 6.0);
        default: return order == 5 ? 720.0 : 0.0;
    }
}

class Expr {
public:
    enum class Kind { constant, variable, sum, product, sin, cos, exp, recip, pow, step };

    Expr() : Expr(constant(0.0)) {}

    static Expr constant(double c) { return Expr(make(Kind::constant, c)); }
    static Expr variable(Var v) {
        auto n = make(Kind::variable, 0.0);
        n->var = v;
        return Expr(n);
    }
    static Expr sum(std::vector<Expr> terms) {
        std::vector<Expr> kept;
        double c = 0.0;
        for (auto& e : terms) {
            if (e.is_constant()) c += e.node_->value;
            else if (e.node_->kind == Kind::sum)
                for (auto& k : e.node_->args) kept.push_back(k);
            else kept.push_back(e);
        }
        if (c != 0.0 || kept.empty()) kept.push_back(constant(c));
        if (kept.size() == 1) return kept.front();
        auto n = make(Kind::sum, 0.0);
        n->args = std::move(kept);
        return Expr(n);
    }
    static Expr product(std::vector<Expr> factors) {
        std::vector<Expr> kept;
        double c = 1.0;
        for (auto& e : factors) {
            if (e.is_constant()) c *= e.node_->value;
            else if (e.node_->kind == Kind::product)
                for (auto& k : e.node_->args) kept.push_back(k);
            else kept.push_back(e);
        }
        if (c == 0.0) return constant(0.0);
        if (c != 1.0 || kept.empty()) kept.insert(kept.begin(), constant(c));
        if (kept.size() == 1) return kept.front();
        auto n = make(Kind::product, 0.0);
        n->args = std::move(kept);
        return Expr(n);
    }
    static Expr unary(Kind k, Expr arg, int order = 0) {
        if (arg.is_constant()) {
            auto tmp = make(k, 0.0);
            tmp->order = order;
            tmp->args = {arg};
            return constant(Expr(tmp)(Vars{}));
        }
        auto n = make(k, 0.0);
        n->order = order;
        n->args = {std::move(arg)};
        return Expr(n);
    }
    static Expr power(Expr arg, int p) {
        if (p == 0) return constant(1.0);
        if (p == 1) return arg;
        return unary(Kind::pow, std::move(arg), p);
    }
    // c0 + c1 v + c2 v^2 + ...
    static Expr poly(Var v, const std::vector<double>& coeffs) {
        std::vector<Expr> terms;
        for (std::size_t k = 0; k < coeffs.size(); ++k)
            if (coeffs[k] != 0.0)
                terms.push_back(product({constant(coeffs[k]), power(variable(v), static_cast<int>(k))}));
        return sum(terms);
    }
    // Rises from 0 to 1 over [a,b] (a<b) or falls from 1 to 0 over [b,a] (a>b).
    static Expr ramp(Var v, double a, double b) {
        auto z = sum({product({constant(1.0 / (b - a)), variable(v)}), constant(-a / (b - a))});
        return unary(Kind::step, z, 0);
    }

    double operator()(const Vars& vars) const { return eval(*node_, vars); }

    Expr derivative(Var v) const { return diff(*this, v); }

    bool is_constant() const { return node_->kind == Kind::constant; }
    double constant_value() const { return node_->value; }
    bool depends_on(Var v) const { return depends(*node_, v); }

    friend Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
    friend Expr operator*(const Expr& a, const Expr& b) { return product({a, b}); }
    friend Expr operator-(const Expr& a, const Expr& b) { return sum({a, product({constant(-1.0), b})}); }
    friend Expr operator-(const Expr& a) { return product({constant(-1.0), a}); }

private:
    struct Node {
        Kind kind;
        double value = 0.0;
        Var var = Var::s;
        int order = 0;
        std::vector<Expr> args;
    };
    std::shared_ptr<const Node> node_;

    explicit Expr(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    static std::shared_ptr<Node> make(Kind k, double v) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->value = v;
        return n;
    }

    static double eval(const Node& n, const Vars& x) {
        switch (n.kind) {
            case Kind::constant: return n.value;
            case Kind::variable: return x.get(n.var);
            case Kind::sum: {
                double r = 0.0;
                for (auto& a : n.args) r += eval(*a.node_, x);
                return r;
            }
            case Kind::product: {
                double r = 1.0;
                for (auto& a : n.args) r *= eval(*a.node_, x);
                return r;
            }
            case Kind::sin: return std::sin(eval(*n.args[0].node_, x));
            case Kind::cos: return std::cos(eval(*n.args[0].node_, x));
            case Kind::exp: return std::exp(eval(*n.args[0].node_, x));
            case Kind::recip: return 1.0 / eval(*n.args[0].node_, x);
            case Kind::pow: {
                const double b = eval(*n.args[0].node_, x);
                double r = 1.0;
                const int p = n.order < 0 ? -n.order : n.order;
                for (int k = 0; k < p; ++k) r *= b;
                return n.order < 0 ? 1.0 / r : r;
            }
            case Kind::step: return smoothstep(eval(*n.args[0].node_, x), n.order);
        }
        return 0.0;
    }

    static bool depends(const Node& n, Var v) {
        if (n.kind == Kind::variable) return n.var == v;
        for (auto& a : n.args)
            if (depends(*a.node_, v)) return true;
        return false;
    }

    static Expr diff(const Expr& e, Var v) {
        const Node& n = *e.node_;
        switch (n.kind) {
            case Kind::constant: return constant(0.0);
            case Kind::variable: return constant(n.var == v ? 1.0 : 0.0);
            case Kind::sum: {
                std::vector<Expr> d;
                for (auto& a : n.args) d.push_back(diff(a, v));
                return sum(d);
            }
            case Kind::product: {
                std::vector<Expr> terms;
                for (std::size_t i = 0; i < n.args.size(); ++i) {
                    Expr di = diff(n.args[i], v);
                    if (di.is_constant() && di.constant_value() == 0.0) continue;
                    std::vector<Expr> f;
                    for (std::size_t j = 0; j < n.args.size(); ++j) f.push_back(j == i ? di : n.args[j]);
                    terms.push_back(product(f));
                }
                return sum(terms);
            }
            default: break;
        }
        const Expr& a = n.args[0];
        Expr da = diff(a, v);
        if (da.is_constant() && da.constant_value() == 0.0) return constant(0.0);
        switch (n.kind) {
            case Kind::sin: return unary(Kind::cos, a) * da;
            case Kind::cos: return -(unary(Kind::sin, a) * da);
            case Kind::exp: return e * da;
            case Kind::recip: return -(power(a, -2) * da);
            case Kind::pow: return constant(n.order) * power(a, n.order - 1) * da;
            case Kind::step:
                if (n.order >= 5) throw ConfigError("smoothstep differentiated beyond fifth order");
                return unary(Kind::step, a, n.order + 1) * da;
            default: return constant(0.0);
        }
    }
};

// JSON form of an expression:
//   number | "s"|"y"|"t"|"x1"|"x2"|"x3"
//   {"const": c}  {"sum": [..]}  {"prod": [..]}  {"poly": {"var": v, "coeffs": [..]}}
//   {"sin": e} {"cos": e} {"exp": e} {"recip": e} {"pow": [e, n]}
//   {"window": {"var": v, "rise": [a,b], "fall": [c,d]}}   smoothstep up over [a,b], down over [c,d]
//   {"michaelis": {"lambda": l, "mu": m}}                  l s / (1 + m s)
inline Expr parse_expr(const nlohmann::json& j) {
    using nlohmann::json;
    if (j.is_number()) return Expr::constant(j.get<double>());
    if (j.is_string()) return Expr::variable(parse_var(j.get<std::string>()));
    if (!j.is_object() || j.size() != 1) throw ConfigError("expression must be a number, variable or single-key object: " + j.dump());
    const auto& [key, val] = *j.items().begin();
    auto list = [&](const json& arr) {
        if (!arr.is_array()) throw ConfigError("'" + key + "' expects an array");
        std::vector<Expr> out;
        for (auto& x : arr) out.push_back(parse_expr(x));
        return out;
    };
    if (key == "const") return Expr::constant(val.get<double>());
    if (key == "sum") return Expr::sum(list(val));
    if (key == "prod") return Expr::product(list(val));
    if (key == "poly") return Expr::poly(parse_var(val.at("var").get<std::string>()), val.at("coeffs").get<std::vector<double>>());
    if (key == "sin") return Expr::unary(Expr::Kind::sin, parse_expr(val));
    if (key == "cos") return Expr::unary(Expr::Kind::cos, parse_expr(val));
    if (key == "exp") return Expr::unary(Expr::Kind::exp, parse_expr(val));
    if (key == "recip") return Expr::unary(Expr::Kind::recip, parse_expr(val));
    if (key == "pow") return Expr::power(parse_expr(val.at(0)), val.at(1).get<int>());
    if (key == "window") {
        const Var v = parse_var(val.at("var").get<std::string>());
        Expr w = Expr::constant(1.0);
        if (val.contains("rise")) {
            auto r = val["rise"].get<std::array<double, 2>>();
            if (!(r[0] < r[1])) throw ConfigError("window rise interval must be increasing");
            w = w * Expr::ramp(v, r[0], r[1]);
        }
        if (val.contains("fall")) {
            auto f = val["fall"].get<std::array<double, 2>>();
            if (!(f[0] < f[1])) throw ConfigError("window fall interval must be increasing");
            w = w * Expr::ramp(v, f[1], f[0]);
        }
        return w;
    }
    if (key == "michaelis") {
        const double l = val.at("lambda").get<double>(), m = val.at("mu").get<double>();
        auto s = Expr::variable(Var::s);
        return Expr::constant(l) * s * Expr::unary(Expr::Kind::recip, Expr::constant(1.0) + Expr::constant(m) * s);
    }
    throw ConfigError("unknown expression type '" + key + "'");
}

}  // namespace thinnet
