#include "asolv/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace asolv {

namespace {

Expr node(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

bool is_number(const Expr& e, double v) {
    return e->kind == ExprNode::Kind::Number && e->value == v;
}

} // namespace

Expr make_number(double v) {
    ExprNode n;
    n.kind = ExprNode::Kind::Number;
    n.value = v;
    return node(std::move(n));
}

Expr make_time() {
    ExprNode n;
    n.kind = ExprNode::Kind::Time;
    return node(std::move(n));
}

Expr make_state(int index) {
    ExprNode n;
    n.kind = ExprNode::Kind::State;
    n.index = index;
    return node(std::move(n));
}

Expr make_param(int index) {
    ExprNode n;
    n.kind = ExprNode::Kind::Param;
    n.index = index;
    return node(std::move(n));
}

Expr make_unary(UnaryFn fn, Expr a) {
    ExprNode n;
    n.kind = ExprNode::Kind::Unary;
    n.fn = fn;
    n.a = std::move(a);
    return node(std::move(n));
}

Expr make_binary(BinOp op, Expr a, Expr b) {
    ExprNode n;
    n.kind = ExprNode::Kind::Binary;
    n.op = op;
    n.a = std::move(a);
    n.b = std::move(b);
    return node(std::move(n));
}

// ---------------------------------------------------------------------------
// Parser: recursive descent.
//   sum     := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := '-' factor | power
//   power   := atom ('^' exponent)?
//   exponent:= signed number | '(' signed number ')'
//   atom    := number | 't' | x<k> | a<k> | fn '(' sum ')' | '(' sum ')'
// '^' binds tighter than unary minus; exponents are numeric literals only.
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
    Parser(const std::string& src, int n) : src_(src), n_(n) {}

    Expr run() {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError("empty expression", 0);
        Expr e = sum();
        skip_ws();
        if (pos_ < src_.size())
            throw SyntaxError("unexpected trailing input", pos_);
        return e;
    }

private:
    const std::string& src_;
    int n_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    bool accept(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c))
            throw SyntaxError(std::string("expected '") + c + "'", pos_);
    }

    Expr sum() {
        Expr e = term();
        for (;;) {
            if (accept('+'))
                e = make_binary(BinOp::Add, e, term());
            else if (accept('-'))
                e = make_binary(BinOp::Sub, e, term());
            else
                return e;
        }
    }

    Expr term() {
        Expr e = factor();
        for (;;) {
            if (accept('*'))
                e = make_binary(BinOp::Mul, e, factor());
            else if (accept('/'))
                e = make_binary(BinOp::Div, e, factor());
            else
                return e;
        }
    }

    Expr factor() {
        if (accept('-')) {
            Expr inner = factor();
            // Fold '-' applied directly to a literal into a negative literal.
            if (inner->kind == ExprNode::Kind::Number)
                return make_number(-inner->value);
            return make_unary(UnaryFn::Neg, inner);
        }
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (accept('^')) {
            return make_binary(BinOp::Pow, base, exponent());
        }
        return base;
    }

    Expr exponent() {
        skip_ws();
        std::size_t at = pos_;
        bool paren = accept('(');
        bool neg = accept('-');
        skip_ws();
        if (pos_ >= src_.size() || !(std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            throw SyntaxError("exponent must be a numeric literal", at);
        double v = number();
        if (paren) expect(')');
        return make_number(neg ? -v : v);
    }

    double number() {
        skip_ws();
        const char* begin = src_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin)
            throw SyntaxError("expected a number", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }

    Expr atom() {
        skip_ws();
        if (pos_ >= src_.size())
            throw SyntaxError("unexpected end of input", pos_);
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return make_number(number());
        if (c == '(') {
            ++pos_;
            Expr e = sum();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)))
            return identifier();
        throw SyntaxError(std::string("unexpected character '") + c + "'", pos_);
    }

    Expr identifier() {
        std::size_t at = pos_;
        std::string name;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            name += src_[pos_];
            ++pos_;
        }
        if (name == "t") return make_time();
        if ((name[0] == 'x' || name[0] == 'a') && name.size() > 1 &&
            std::all_of(name.begin() + 1, name.end(),
                        [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
            int idx = std::atoi(name.c_str() + 1);
            if (idx < 1 || idx > n_)
                throw ValidationError("variable index out of range: '" + name +
                                      "' with n=" + std::to_string(n_));
            return name[0] == 'x' ? make_state(idx) : make_param(idx);
        }
        static const std::pair<const char*, UnaryFn> fns[] = {
            {"sin", UnaryFn::Sin}, {"cos", UnaryFn::Cos},   {"exp", UnaryFn::Exp},
            {"log", UnaryFn::Log}, {"sqrt", UnaryFn::Sqrt}, {"abs", UnaryFn::Abs},
        };
        for (const auto& [fname, fn] : fns) {
            if (name == fname) {
                expect('(');
                Expr arg = sum();
                expect(')');
                return make_unary(fn, arg);
            }
        }
        throw SyntaxError("unknown identifier '" + name + "'", at);
    }
};

} // namespace

Expr parse(const std::string& source, int n) {
    if (n < 1) throw ValidationError("dimension n must be >= 1");
    return Parser(source, n).run();
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void domain_fail(const char* what, const Expr& e) {
    throw DomainError(what, print(e));
}

double eval_rec(const Expr& e, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& alpha) {
    switch (e->kind) {
    case ExprNode::Kind::Number:
        return e->value;
    case ExprNode::Kind::Time:
        return t;
    case ExprNode::Kind::State:
        if (e->index > x.size()) domain_fail("state vector too short", e);
        return x[e->index - 1];
    case ExprNode::Kind::Param:
        if (e->index > alpha.size()) domain_fail("parameter vector too short", e);
        return alpha[e->index - 1];
    case ExprNode::Kind::Unary: {
        double v = eval_rec(e->a, t, x, alpha);
        switch (e->fn) {
        case UnaryFn::Neg: return -v;
        case UnaryFn::Sin: return std::sin(v);
        case UnaryFn::Cos: return std::cos(v);
        case UnaryFn::Exp: {
            double r = std::exp(v);
            if (!std::isfinite(r)) domain_fail("exp overflow", e);
            return r;
        }
        case UnaryFn::Log:
            if (v <= 0.0) domain_fail("log of non-positive value", e);
            return std::log(v);
        case UnaryFn::Sqrt:
            if (v < 0.0) domain_fail("sqrt of negative value", e);
            return std::sqrt(v);
        case UnaryFn::Abs: return std::fabs(v);
        }
        break;
    }
    case ExprNode::Kind::Binary: {
        double lhs = eval_rec(e->a, t, x, alpha);
        double rhs = eval_rec(e->b, t, x, alpha);
        switch (e->op) {
        case BinOp::Add: return lhs + rhs;
        case BinOp::Sub: return lhs - rhs;
        case BinOp::Mul: return lhs * rhs;
        case BinOp::Div:
            if (rhs == 0.0) domain_fail("division by zero", e);
            return lhs / rhs;
        case BinOp::Pow: {
            double c = rhs;
            if (lhs == 0.0 && c < 0.0) domain_fail("zero base with negative exponent", e);
            if (lhs < 0.0 && c != std::floor(c)) domain_fail("negative base with fractional exponent", e);
            double r = std::pow(lhs, c);
            if (!std::isfinite(r)) domain_fail("pow overflow", e);
            return r;
        }
        }
        break;
    }
    }
    throw Error("corrupt expression node");
}

} // namespace

double eval(const Expr& e, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& alpha) {
    return eval_rec(e, t, x, alpha);
}

// ---------------------------------------------------------------------------
// Differentiation. Folding constructors keep derivative trees small; the
// parser deliberately does not use them.
// ---------------------------------------------------------------------------

namespace {

Expr add(Expr a, Expr b) {
    if (is_number(a, 0.0)) return b;
    if (is_number(b, 0.0)) return a;
    if (a->kind == ExprNode::Kind::Number && b->kind == ExprNode::Kind::Number)
        return make_number(a->value + b->value);
    return make_binary(BinOp::Add, std::move(a), std::move(b));
}

Expr sub(Expr a, Expr b) {
    if (is_number(b, 0.0)) return a;
    if (a->kind == ExprNode::Kind::Number && b->kind == ExprNode::Kind::Number)
        return make_number(a->value - b->value);
    if (is_number(a, 0.0)) return make_unary(UnaryFn::Neg, std::move(b));
    return make_binary(BinOp::Sub, std::move(a), std::move(b));
}

Expr mul(Expr a, Expr b) {
    if (is_number(a, 0.0) || is_number(b, 0.0)) return make_number(0.0);
    if (is_number(a, 1.0)) return b;
    if (is_number(b, 1.0)) return a;
    if (a->kind == ExprNode::Kind::Number && b->kind == ExprNode::Kind::Number)
        return make_number(a->value * b->value);
    return make_binary(BinOp::Mul, std::move(a), std::move(b));
}

Expr div(Expr a, Expr b) {
    if (is_number(a, 0.0)) return make_number(0.0);
    if (is_number(b, 1.0)) return a;
    return make_binary(BinOp::Div, std::move(a), std::move(b));
}

Expr neg(Expr a) {
    if (a->kind == ExprNode::Kind::Number) return make_number(-a->value);
    return make_unary(UnaryFn::Neg, std::move(a));
}

Expr pow_lit(Expr base, double c) {
    if (c == 0.0) return make_number(1.0);
    if (c == 1.0) return base;
    return make_binary(BinOp::Pow, std::move(base), make_number(c));
}

Expr diff_rec(const Expr& e, const DiffVar& var) {
    switch (e->kind) {
    case ExprNode::Kind::Number:
        return make_number(0.0);
    case ExprNode::Kind::Time:
        return make_number(var.kind == DiffVar::Kind::Time ? 1.0 : 0.0);
    case ExprNode::Kind::State:
        return make_number(var.kind == DiffVar::Kind::State && var.index == e->index ? 1.0 : 0.0);
    case ExprNode::Kind::Param:
        return make_number(var.kind == DiffVar::Kind::Param && var.index == e->index ? 1.0 : 0.0);
    case ExprNode::Kind::Unary: {
        Expr du = diff_rec(e->a, var);
        const Expr& u = e->a;
        switch (e->fn) {
        case UnaryFn::Neg: return neg(std::move(du));
        case UnaryFn::Sin: return mul(make_unary(UnaryFn::Cos, u), std::move(du));
        case UnaryFn::Cos: return neg(mul(make_unary(UnaryFn::Sin, u), std::move(du)));
        case UnaryFn::Exp: return mul(make_unary(UnaryFn::Exp, u), std::move(du));
        case UnaryFn::Log: return div(std::move(du), u);
        case UnaryFn::Sqrt:
            return div(std::move(du), mul(make_number(2.0), make_unary(UnaryFn::Sqrt, u)));
        case UnaryFn::Abs:
            // d|u| = u/|u| * u'; naturally raises a domain error at u = 0.
            return mul(div(u, make_unary(UnaryFn::Abs, u)), std::move(du));
        }
        break;
    }
    case ExprNode::Kind::Binary: {
        const Expr& u = e->a;
        const Expr& v = e->b;
        switch (e->op) {
        case BinOp::Add: return add(diff_rec(u, var), diff_rec(v, var));
        case BinOp::Sub: return sub(diff_rec(u, var), diff_rec(v, var));
        case BinOp::Mul:
            return add(mul(diff_rec(u, var), v), mul(u, diff_rec(v, var)));
        case BinOp::Div:
            return sub(div(diff_rec(u, var), v),
                       div(mul(u, diff_rec(v, var)), make_binary(BinOp::Pow, v, make_number(2.0))));
        case BinOp::Pow: {
            // Exponent is a numeric literal by grammar restriction.
            double c = v->value;
            return mul(mul(make_number(c), pow_lit(u, c - 1.0)), diff_rec(u, var));
        }
        }
        break;
    }
    }
    throw Error("corrupt expression node");
}

} // namespace

Expr differentiate(const Expr& e, DiffVar var) { return diff_rec(e, var); }

Expr substitute_states(const Expr& e, const std::vector<Expr>& subs) {
    switch (e->kind) {
    case ExprNode::Kind::State:
        if (e->index < 1 || static_cast<std::size_t>(e->index) > subs.size())
            throw ValidationError("state substitution index out of range");
        return subs[static_cast<std::size_t>(e->index) - 1];
    case ExprNode::Kind::Unary:
        return make_unary(e->fn, substitute_states(e->a, subs));
    case ExprNode::Kind::Binary:
        return make_binary(e->op, substitute_states(e->a, subs), substitute_states(e->b, subs));
    default:
        return e;
    }
}

// ---------------------------------------------------------------------------
// Printing with minimal parentheses
// ---------------------------------------------------------------------------

namespace {

// Higher binds tighter.
int precedence(const Expr& e) {
    switch (e->kind) {
    case ExprNode::Kind::Binary:
        switch (e->op) {
        case BinOp::Add:
        case BinOp::Sub: return 1;
        case BinOp::Mul:
        case BinOp::Div: return 2;
        case BinOp::Pow: return 4;
        }
        return 1;
    case ExprNode::Kind::Unary:
        return e->fn == UnaryFn::Neg ? 3 : 5;
    case ExprNode::Kind::Number:
        return e->value < 0.0 ? 3 : 5;
    default:
        return 5;
    }
}

std::string fmt_number(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

void print_rec(const Expr& e, std::string& out) {
    auto wrap = [&](const Expr& child, int min_prec) {
        bool need = precedence(child) < min_prec;
        if (need) out += '(';
        print_rec(child, out);
        if (need) out += ')';
    };
    switch (e->kind) {
    case ExprNode::Kind::Number:
        out += fmt_number(e->value);
        return;
    case ExprNode::Kind::Time:
        out += 't';
        return;
    case ExprNode::Kind::State:
        out += 'x';
        out += std::to_string(e->index);
        return;
    case ExprNode::Kind::Param:
        out += 'a';
        out += std::to_string(e->index);
        return;
    case ExprNode::Kind::Unary:
        if (e->fn == UnaryFn::Neg) {
            out += '-';
            wrap(e->a, 3);
            return;
        }
        switch (e->fn) {
        case UnaryFn::Sin: out += "sin"; break;
        case UnaryFn::Cos: out += "cos"; break;
        case UnaryFn::Exp: out += "exp"; break;
        case UnaryFn::Log: out += "log"; break;
        case UnaryFn::Sqrt: out += "sqrt"; break;
        default: out += "abs"; break;
        }
        out += '(';
        print_rec(e->a, out);
        out += ')';
        return;
    case ExprNode::Kind::Binary: {
        const char* ops;
        int prec = precedence(e);
        switch (e->op) {
        case BinOp::Add: ops = " + "; break;
        case BinOp::Sub: ops = " - "; break;
        case BinOp::Mul: ops = "*"; break;
        case BinOp::Div: ops = "/"; break;
        case BinOp::Pow: ops = "^"; break;
        }
        if (e->op == BinOp::Pow) {
            wrap(e->a, 5); // base must be an atom
            out += ops;
            if (e->b->value < 0.0) {
                out += '(';
                out += fmt_number(e->b->value);
                out += ')';
            } else {
                out += fmt_number(e->b->value);
            }
            return;
        }
        wrap(e->a, prec);
        out += ops;
        // Left-associative: right child needs strictly higher precedence.
        wrap(e->b, prec + 1);
        return;
    }
    }
}

} // namespace

std::string print(const Expr& e) {
    std::string out;
    print_rec(e, out);
    return out;
}

bool expr_equal(const Expr& lhs, const Expr& rhs) {
    if (lhs->kind != rhs->kind) return false;
    switch (lhs->kind) {
    case ExprNode::Kind::Number: {
        // bit-exact, with -0 == +0 treated equal
        return lhs->value == rhs->value &&
               std::signbit(lhs->value) == std::signbit(rhs->value);
    }
    case ExprNode::Kind::Time:
        return true;
    case ExprNode::Kind::State:
    case ExprNode::Kind::Param:
        return lhs->index == rhs->index;
    case ExprNode::Kind::Unary:
        return lhs->fn == rhs->fn && expr_equal(lhs->a, rhs->a);
    case ExprNode::Kind::Binary:
        return lhs->op == rhs->op && expr_equal(lhs->a, rhs->a) && expr_equal(lhs->b, rhs->b);
    }
    return false;
}

int max_state_index(const Expr& e) {
    switch (e->kind) {
    case ExprNode::Kind::State: return e->index;
    case ExprNode::Kind::Unary: return max_state_index(e->a);
    case ExprNode::Kind::Binary:
        return std::max(max_state_index(e->a), max_state_index(e->b));
    default: return 0;
    }
}

int max_param_index(const Expr& e) {
    switch (e->kind) {
    case ExprNode::Kind::Param: return e->index;
    case ExprNode::Kind::Unary: return max_param_index(e->a);
    case ExprNode::Kind::Binary:
        return std::max(max_param_index(e->a), max_param_index(e->b));
    default: return 0;
    }
}

} // namespace asolv
