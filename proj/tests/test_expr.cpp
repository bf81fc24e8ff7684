#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "asolv/expr.hpp"

using namespace asolv;

namespace {

double ev(const char* src, double t, std::vector<double> x = {}, std::vector<double> a = {},
          int n = 2) {
    Eigen::VectorXd xv = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<long>(x.size()));
    Eigen::VectorXd av = Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<long>(a.size()));
    return eval(parse(src, n), t, xv, av);
}

} // namespace

TEST_CASE("parse produces the grammar-forced tree shape") {
    Expr e = parse("1/t + a1/t^2", 1);
    REQUIRE(e->kind == ExprNode::Kind::Binary);
    CHECK(e->op == BinOp::Add);
    // left: 1/t
    REQUIRE(e->a->kind == ExprNode::Kind::Binary);
    CHECK(e->a->op == BinOp::Div);
    CHECK(e->a->a->kind == ExprNode::Kind::Number);
    CHECK(e->a->a->value == 1.0);
    CHECK(e->a->b->kind == ExprNode::Kind::Time);
    // right: a1 / t^2
    REQUIRE(e->b->kind == ExprNode::Kind::Binary);
    CHECK(e->b->op == BinOp::Div);
    CHECK(e->b->a->kind == ExprNode::Kind::Param);
    CHECK(e->b->a->index == 1);
    REQUIRE(e->b->b->kind == ExprNode::Kind::Binary);
    CHECK(e->b->b->op == BinOp::Pow);
    CHECK(e->b->b->a->kind == ExprNode::Kind::Time);
    CHECK(e->b->b->b->value == 2.0);
}

TEST_CASE("caret binds tighter than unary minus") {
    // -t^(-3) * x1^3 must read as (-(t^-3)) * (x1^3)
    Expr e = parse("-t^(-3) * x1^3", 2);
    REQUIRE(e->kind == ExprNode::Kind::Binary);
    CHECK(e->op == BinOp::Mul);
    CHECK(e->a->kind == ExprNode::Kind::Unary);
    CHECK(e->a->fn == UnaryFn::Neg);
    CHECK(e->a->a->op == BinOp::Pow);
    CHECK(ev("-t^(-3) * x1^3", 2.0, {3.0, 0.0}) == doctest::Approx(-27.0 / 8.0));
    CHECK(ev("-t^2", 3.0) == doctest::Approx(-9.0));
}

TEST_CASE("left associativity within a tier") {
    CHECK(ev("8 - 3 - 2", 1.0) == doctest::Approx(3.0));
    CHECK(ev("8 / 4 / 2", 1.0) == doctest::Approx(1.0));
}

TEST_CASE("variable index out of declared range is rejected") {
    CHECK_THROWS_AS(parse("x3", 2), ValidationError);
    CHECK_THROWS_AS(parse("x0", 1), ValidationError);
    CHECK_THROWS_AS(parse("a2", 1), ValidationError);
    CHECK_NOTHROW(parse("x2 + a2", 2));
}

TEST_CASE("syntax errors carry a byte offset") {
    try {
        parse("1 + * 2", 1);
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.offset() == 4);
    }
    CHECK_THROWS_AS(parse("", 1), SyntaxError);
    CHECK_THROWS_AS(parse("foo(t)", 1), SyntaxError);
    CHECK_THROWS_AS(parse("sin t", 1), SyntaxError);
    CHECK_THROWS_AS(parse("(1 + t", 1), SyntaxError);
    CHECK_THROWS_AS(parse("1 + t)", 1), SyntaxError);
    CHECK_THROWS_AS(parse("t^x1", 1), SyntaxError); // exponents are literals only
}

TEST_CASE("eval matches hand arithmetic") {
    CHECK(ev("t^2", 3.0) == doctest::Approx(9.0));
    CHECK(ev("a1*cos(t)+a2*sin(t)", 0.0, {}, {2.0, 5.0}) == doctest::Approx(2.0));
    CHECK(ev("1/t + a1/t^2", 10.0, {}, {1.0}, 1) == doctest::Approx(0.11));
    CHECK(ev("sqrt(abs(0 - t))", 4.0) == doctest::Approx(2.0));
    CHECK(ev("exp(log(t))", 7.5) == doctest::Approx(7.5));
}

TEST_CASE("eval raises domain errors naming the subexpression") {
    CHECK_THROWS_AS(ev("log(1 - t)", 2.0), DomainError);
    CHECK_THROWS_AS(ev("sqrt(1 - t)", 2.0), DomainError);
    CHECK_THROWS_AS(ev("1/(t - 1)", 1.0), DomainError);
    CHECK_THROWS_AS(ev("(0 - t)^0.5", 1.0), DomainError);
    try {
        ev("1 + log(1 - t)", 2.0);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("log(1 - t)") != std::string::npos);
    }
}

TEST_CASE("symbolic derivatives of the calculus table") {
    // d/dt (1/t) = -1/t^2
    Expr d = differentiate(parse("1/t", 1), DiffVar::time());
    for (double t : {0.5, 1.0, 3.0, 17.0})
        CHECK(eval_t(d, t) == doctest::Approx(-1.0 / (t * t)).epsilon(1e-12));
    // d/dx1 sin(x1) = cos(x1)
    Expr ds = differentiate(parse("sin(x1)", 1), DiffVar::state(1));
    for (double v : {-2.0, 0.0, 0.7})
        CHECK(eval(ds, 1.0, Eigen::VectorXd::Constant(1, v), {}) ==
              doctest::Approx(std::cos(v)).epsilon(1e-12));
    // d/da1 (a1^2 / t^4) = 2 a1 / t^4
    Expr da = differentiate(parse("a1^2 / t^4", 1), DiffVar::param(1));
    CHECK(eval(da, 2.0, {}, Eigen::VectorXd::Constant(1, 3.0)) ==
          doctest::Approx(6.0 / 16.0).epsilon(1e-12));
    // derivative with respect to an absent variable vanishes
    Expr dz = differentiate(parse("sin(t)", 1), DiffVar::param(1));
    CHECK(eval_t(dz, 1.3) == 0.0);
}

namespace {

// Random well-formed expression over t, x1, a1 with the full operator set
// except log/sqrt (kept out so random points stay in-domain).
Expr random_expr(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth == 0 ? 3 : 9);
    std::uniform_real_distribution<double> num(-3.0, 3.0);
    switch (pick(rng)) {
    case 0: return make_number(std::round(num(rng) * 4.0) / 4.0);
    case 1: return make_time();
    case 2: return make_state(1);
    case 3: return make_param(1);
    case 4: return make_binary(BinOp::Add, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 5: return make_binary(BinOp::Sub, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 6: return make_binary(BinOp::Mul, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 7: return make_binary(BinOp::Div, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 8: {
        std::uniform_int_distribution<int> ex(2, 3);
        return make_binary(BinOp::Pow, random_expr(rng, depth - 1),
                           make_number(static_cast<double>(ex(rng))));
    }
    default: {
        std::uniform_int_distribution<int> fn(0, 2);
        UnaryFn fns[] = {UnaryFn::Neg, UnaryFn::Sin, UnaryFn::Cos};
        UnaryFn f = fns[fn(rng)];
        Expr inner = random_expr(rng, depth - 1);
        // The parser folds '-' on a literal into a negative number; mirror
        // that here so printed trees round-trip structurally.
        if (f == UnaryFn::Neg && inner->kind == ExprNode::Kind::Number)
            return make_number(-inner->value);
        return make_unary(f, inner);
    }
    }
}

} // namespace

TEST_CASE("200 random expressions: symbolic derivative vs central difference") {
    std::mt19937 rng(20260823);
    std::uniform_real_distribution<double> tp(0.5, 2.0), vp(-2.0, 2.0);
    int done = 0, guard = 0;
    while (done < 200 && ++guard < 20000) {
        Expr e = random_expr(rng, 3);
        double t = tp(rng);
        Eigen::VectorXd x = Eigen::VectorXd::Constant(1, vp(rng));
        Eigen::VectorXd a = Eigen::VectorXd::Constant(1, vp(rng));

        DiffVar vars[] = {DiffVar::time(), DiffVar::state(1), DiffVar::param(1)};
        std::uniform_int_distribution<int> which(0, 2);
        DiffVar var = vars[which(rng)];
        double v = var.kind == DiffVar::Kind::Time ? t
                   : var.kind == DiffVar::Kind::State ? x[0]
                                                      : a[0];
        double h = std::max(std::fabs(v), 1.0) * std::ldexp(1.0, -17);
        auto at = [&](double shift) {
            double tt = t, xx = x[0], aa = a[0];
            (var.kind == DiffVar::Kind::Time ? tt
             : var.kind == DiffVar::Kind::State ? xx
                                                : aa) += shift;
            return eval(e, tt, Eigen::VectorXd::Constant(1, xx), Eigen::VectorXd::Constant(1, aa));
        };
        try {
            double sym = eval(differentiate(e, var), t, x, a);
            double fp = at(h), fm = at(-h);
            // Skip points where the value explodes: truncation error of the
            // finite difference swamps the comparison there.
            if (!std::isfinite(sym) || !std::isfinite(fp) || !std::isfinite(fm)) continue;
            if (std::fabs(fp) > 1e6 || std::fabs(fm) > 1e6 || std::fabs(sym) > 1e6) continue;
            double numeric = (fp - fm) / (2.0 * h);
            CHECK(std::fabs(sym - numeric) / (1.0 + std::fabs(sym)) <= 1e-6);
            ++done;
        } catch (const DomainError&) {
            continue; // random point fell on a pole; draw again
        }
    }
    CHECK(done == 200);
}

TEST_CASE("printing is idempotent and round-trips through the parser") {
    const char* sources[] = {
        "1/t + a1/t^2",
        "-t^(-3) * x1^3",
        "a1*cos(t) + a2*sin(t)",
        "-x1 - x1^3 / t^3",
        "-sin(x1)",
        "(x1 + x2)^2 / (1 + t)",
        "abs(t - 2)*exp(0 - t)",
    };
    for (const char* src : sources) {
        Expr e = parse(src, 2);
        std::string once = print(e);
        Expr back = parse(once, 2);
        CHECK(expr_equal(e, back));
        CHECK(print(back) == once);
    }

    std::mt19937 rng(7);
    for (int i = 0; i < 100; ++i) {
        Expr e = random_expr(rng, 3);
        std::string once = print(e);
        Expr back = parse(once, 2);
        CHECK(expr_equal(e, back));
        CHECK(print(back) == once);
    }
}

TEST_CASE("eval is pure: repeated calls are bit-identical") {
    Expr e = parse("sin(t)^2 + a1*exp(0 - x1^2)", 1);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3);
    Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.7);
    double first = eval(e, 2.5, x, a);
    for (int i = 0; i < 10; ++i) CHECK(eval(e, 2.5, x, a) == first);
}

TEST_CASE("state substitution composes expressions") {
    Expr f = parse("x1^2 + t", 2);
    std::vector<Expr> subs = {parse("a1/t", 2), parse("t", 2)};
    Expr composed = substitute_states(f, subs);
    CHECK(max_state_index(composed) == 0);
    CHECK(eval(composed, 2.0, {}, Eigen::VectorXd::Constant(2, 6.0)) ==
          doctest::Approx(9.0 + 2.0));
}

TEST_CASE("referenced index bookkeeping") {
    Expr e = parse("x2*a1 + x1", 2);
    CHECK(max_state_index(e) == 2);
    CHECK(max_param_index(e) == 1);
    CHECK(max_state_index(parse("t", 1)) == 0);
}
