#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "asolv/errors.hpp"

namespace asolv {

// Closed expression DSL over t, x1..xn, a1..an with + - * / ^, unary minus
// and sin cos exp log sqrt abs. Trees are immutable after construction and
// safe to share across threads.

enum class UnaryFn { Neg, Sin, Cos, Exp, Log, Sqrt, Abs };
enum class BinOp { Add, Sub, Mul, Div, Pow };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { Number, Time, State, Param, Unary, Binary };

    Kind kind;
    double value = 0.0; // Number
    int index = 0;      // State/Param, 1-based
    UnaryFn fn = UnaryFn::Neg;
    BinOp op = BinOp::Add;
    Expr a, b;
};

Expr make_number(double v);
Expr make_time();
Expr make_state(int index);
Expr make_param(int index);
Expr make_unary(UnaryFn fn, Expr a);
Expr make_binary(BinOp op, Expr a, Expr b);

/// Which variable to differentiate with respect to.
struct DiffVar {
    enum class Kind { Time, State, Param };
    Kind kind;
    int index = 0; // 1-based, ignored for Time

    static DiffVar time() { return {Kind::Time, 0}; }
    static DiffVar state(int i) { return {Kind::State, i}; }
    static DiffVar param(int i) { return {Kind::Param, i}; }
};

/// Parse DSL source for a system of dimension n.
/// Throws SyntaxError (with byte offset) or ValidationError for a
/// variable index outside 1..n.
Expr parse(const std::string& source, int n);

/// Evaluate at (t, x, alpha). Missing vectors may be empty when the
/// expression does not reference the corresponding variables.
double eval(const Expr& e, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& alpha);

inline double eval_t(const Expr& e, double t) {
    return eval(e, t, Eigen::VectorXd(), Eigen::VectorXd());
}

/// Symbolic derivative. Constant subtrees produced by the rules are folded
/// but no other simplification is attempted.
Expr differentiate(const Expr& e, DiffVar var);

/// Replace every state variable x_i by subs[i-1].
Expr substitute_states(const Expr& e, const std::vector<Expr>& subs);

/// Render with the minimal parentheses the grammar needs to round-trip.
std::string print(const Expr& e);

/// Structural equality (numbers compared bit-exactly).
bool expr_equal(const Expr& lhs, const Expr& rhs);

/// Largest state / parameter index referenced, 0 if none.
int max_state_index(const Expr& e);
int max_param_index(const Expr& e);

} // namespace asolv
