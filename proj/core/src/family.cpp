#include "asolv/family.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <Eigen/LU>

namespace asolv {

bool Box::contains(const Eigen::VectorXd& v) const {
    if (v.size() != dim()) return false;
    for (int i = 0; i < dim(); ++i) {
        const auto& ax = axes[static_cast<std::size_t>(i)];
        if (v[i] < ax[0] || v[i] > ax[1]) return false;
    }
    return true;
}

bool Box::strictly_contains(const Box& other) const {
    if (other.dim() != dim()) return false;
    for (int i = 0; i < dim(); ++i) {
        const auto& out = axes[static_cast<std::size_t>(i)];
        const auto& in = other.axes[static_cast<std::size_t>(i)];
        if (!(in[0] > out[0] && in[1] < out[1] && in[0] <= in[1])) return false;
    }
    return true;
}

Eigen::VectorXd Box::center() const {
    Eigen::VectorXd c(dim());
    for (int i = 0; i < dim(); ++i)
        c[i] = 0.5 * (axes[static_cast<std::size_t>(i)][0] + axes[static_cast<std::size_t>(i)][1]);
    return c;
}

void SystemDef::validate() const {
    if (n < 1) throw ValidationError("SystemDef: n must be >= 1");
    if (!(k >= 0.0)) throw ValidationError("SystemDef: k must be >= 0");
    if (!(t0 > 0.0)) throw ValidationError("SystemDef: t0 must be > 0");
    if (static_cast<int>(f.size()) != n)
        throw ValidationError("SystemDef: f must have exactly n components");
    for (const auto& e : f) {
        if (max_param_index(e) > 0)
            throw ValidationError("SystemDef: f may reference only x1..xn and t, not parameters");
        if (max_state_index(e) > n)
            throw ValidationError("SystemDef: f references a state index above n");
    }
    if (domain_hint && domain_hint->dim() != n)
        throw ValidationError("SystemDef: domain_hint dimension mismatch");
}

void AsymptoticFamily::validate(int n) const {
    if (static_cast<int>(X.size()) != n)
        throw ValidationError("AsymptoticFamily: X must have exactly n components");
    for (const auto& e : X) {
        if (max_state_index(e) > 0)
            throw ValidationError("AsymptoticFamily: X may reference only t and a1..an");
        if (max_param_index(e) > n)
            throw ValidationError("AsymptoticFamily: X references a parameter index above n");
    }
    if (A0.dim() != n || compact.dim() != n)
        throw ValidationError("AsymptoticFamily: parameter boxes must have dimension n");
    if (!A0.strictly_contains(compact))
        throw ValidationError("AsymptoticFamily: compact must lie strictly inside A0");
}

Eigen::MatrixXd jacobian_inverse(const Eigen::MatrixXd& J, double det_floor) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    double det = lu.determinant();
    if (!(std::fabs(det) >= det_floor))
        throw SingularJacobian("jacobian determinant " + std::to_string(det) +
                               " below floor " + std::to_string(det_floor));
    return lu.inverse();
}

double DetFloor::at(double t) const { return coeff * std::pow(t, p); }

FamilyModel::FamilyModel(SystemDef sys, AsymptoticFamily fam)
    : sys_(std::move(sys)), fam_(std::move(fam)) {
    sys_.validate();
    fam_.validate(sys_.n);
    const int n = sys_.n;

    dXdt_.reserve(static_cast<std::size_t>(n));
    for (const auto& Xi : fam_.X) dXdt_.push_back(differentiate(Xi, DiffVar::time()));

    // Residual composed symbolically: Y_i = dX_i/dt - t^k f_i(X, t).
    for (int i = 0; i < n; ++i) {
        Expr fX = substitute_states(sys_.f[static_cast<std::size_t>(i)], fam_.X);
        Expr rhs = (sys_.k == 0.0)
                       ? fX
                       : make_binary(BinOp::Mul,
                                     make_binary(BinOp::Pow, make_time(), make_number(sys_.k)), fX);
        Y_.push_back(make_binary(BinOp::Sub, dXdt_[static_cast<std::size_t>(i)], rhs));
    }

    J_.assign(static_cast<std::size_t>(n), {});
    dJdt_.assign(static_cast<std::size_t>(n), {});
    dYdA_.assign(static_cast<std::size_t>(n), {});
    dfdx_.assign(static_cast<std::size_t>(n), {});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            J_[static_cast<std::size_t>(i)].push_back(
                differentiate(fam_.X[static_cast<std::size_t>(i)], DiffVar::param(j + 1)));
            dJdt_[static_cast<std::size_t>(i)].push_back(
                differentiate(J_[static_cast<std::size_t>(i)].back(), DiffVar::time()));
            dYdA_[static_cast<std::size_t>(i)].push_back(
                differentiate(Y_[static_cast<std::size_t>(i)], DiffVar::param(j + 1)));
            dfdx_[static_cast<std::size_t>(i)].push_back(
                differentiate(sys_.f[static_cast<std::size_t>(i)], DiffVar::state(j + 1)));
        }
    }
}

namespace {
const Eigen::VectorXd kEmpty;

Eigen::VectorXd eval_vector(const std::vector<Expr>& es, double t, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& alpha) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(es.size()));
    for (std::size_t i = 0; i < es.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = eval(es[i], t, x, alpha);
    return out;
}

Eigen::MatrixXd eval_matrix(const std::vector<std::vector<Expr>>& es, double t,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& alpha) {
    const auto n = static_cast<Eigen::Index>(es.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(i, j) = eval(es[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], t, x, alpha);
    return out;
}
} // namespace

Eigen::VectorXd FamilyModel::X_value(double t, const Eigen::VectorXd& alpha) const {
    return eval_vector(fam_.X, t, kEmpty, alpha);
}

Eigen::VectorXd FamilyModel::dXdt_value(double t, const Eigen::VectorXd& alpha) const {
    return eval_vector(dXdt_, t, kEmpty, alpha);
}

Eigen::VectorXd FamilyModel::f_value(const Eigen::VectorXd& x, double t) const {
    return eval_vector(sys_.f, t, x, kEmpty);
}

Eigen::VectorXd FamilyModel::residual(double t, const Eigen::VectorXd& alpha) const {
    return eval_vector(Y_, t, kEmpty, alpha);
}

Eigen::MatrixXd FamilyModel::jacobian(double t, const Eigen::VectorXd& alpha) const {
    return eval_matrix(J_, t, kEmpty, alpha);
}

Eigen::MatrixXd FamilyModel::jacobian_dt(double t, const Eigen::VectorXd& alpha) const {
    return eval_matrix(dJdt_, t, kEmpty, alpha);
}

Eigen::MatrixXd FamilyModel::d_alpha_residual(double t, const Eigen::VectorXd& alpha) const {
    return eval_matrix(dYdA_, t, kEmpty, alpha);
}

Eigen::MatrixXd FamilyModel::linearization(double t, const Eigen::VectorXd& alpha) const {
    return linearization_at(X_value(t, alpha), t);
}

Eigen::MatrixXd FamilyModel::linearization_at(const Eigen::VectorXd& x, double t) const {
    return eval_matrix(dfdx_, t, x, kEmpty);
}

Eigen::VectorXd FamilyModel::nonlinear_part(double t, const Eigen::VectorXd& alpha,
                                            const Eigen::VectorXd& R) const {
    Eigen::VectorXd X = X_value(t, alpha);
    return f_value(X + R, t) - f_value(X, t) - linearization_at(X, t) * R;
}

Eigen::MatrixXd FamilyModel::reduced_matrix(double t, const Eigen::VectorXd& alpha,
                                            const DetFloor& floor) const {
    Eigen::MatrixXd Jinv = jacobian_inverse(jacobian(t, alpha), floor.at(t));
    return -Jinv * d_alpha_residual(t, alpha);
}

// ---------------------------------------------------------------------------
// Forcing Z(t)
// ---------------------------------------------------------------------------

namespace {

// Adaptive Simpson in u = log t on [ua, ub] for a vector integrand.
class CellIntegrator {
public:
    CellIntegrator(const std::function<Eigen::VectorXd(double)>& g, const QuadratureSpec& quad)
        : g_(g), quad_(quad) {}

    Eigen::VectorXd integrate(double ua, double ub) {
        int splits = 1;
        if (quad_.phase_scale && *quad_.phase_scale > 0.0) {
            double period = 2.0 * std::numbers::pi / *quad_.phase_scale;
            double span_t = std::exp(ub) - std::exp(ua);
            splits = std::clamp(static_cast<int>(std::ceil(span_t / (period / 8.0))), 1, 1 << 20);
        }
        Eigen::VectorXd total;
        for (int s = 0; s < splits; ++s) {
            double a = ua + (ub - ua) * s / splits;
            double b = ua + (ub - ua) * (s + 1) / splits;
            Eigen::VectorXd part = integrate_one(a, b);
            total = s == 0 ? part : Eigen::VectorXd(total + part);
        }
        return total;
    }

private:
    Eigen::VectorXd integrate_one(double ua, double ub) {
        Eigen::VectorXd fa = g_(ua), fm = g_(0.5 * (ua + ub)), fb = g_(ub);
        Eigen::VectorXd whole = simpson(ua, ub, fa, fm, fb);
        // Tolerance against the unsigned integral, not |whole|: at a
        // cancellation point |whole| ~ 0 and a relative test would recurse
        // to max_depth on every such interval.
        double mag = (ub - ua) / 6.0 * (fa.norm() + 4.0 * fm.norm() + fb.norm());
        double tol = quad_.rel_tol * (mag + 1e-300);
        return recurse(ua, ub, fa, fm, fb, whole, tol, quad_.max_depth,
                       std::numeric_limits<double>::infinity());
    }

private:
    static Eigen::VectorXd simpson(double a, double b, const Eigen::VectorXd& fa,
                                   const Eigen::VectorXd& fm, const Eigen::VectorXd& fb) {
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }

    Eigen::VectorXd recurse(double a, double b, const Eigen::VectorXd& fa,
                            const Eigen::VectorXd& fm, const Eigen::VectorXd& fb,
                            const Eigen::VectorXd& whole, double tol, int depth,
                            double parent_gap) {
        double m = 0.5 * (a + b);
        Eigen::VectorXd fml = g_(0.5 * (a + m));
        Eigen::VectorXd fmr = g_(0.5 * (m + b));
        Eigen::VectorXd left = simpson(a, m, fa, fml, fm);
        Eigen::VectorXd right = simpson(m, b, fm, fmr, fb);
        Eigen::VectorXd sum = left + right;
        double gap = (sum - whole).norm();
        // Truncation error shrinks 16x per bisection; a gap that stops
        // shrinking means the integrand's own evaluation noise dominates
        // and further refinement only burns evaluations.
        bool noise_floor = gap > 0.5 * parent_gap;
        if (depth <= 0 || gap <= 15.0 * tol || noise_floor)
            return sum + (sum - whole) / 15.0;
        return recurse(a, m, fa, fml, fm, left, 0.5 * tol, depth - 1, 0.5 * gap) +
               recurse(m, b, fm, fmr, fb, right, 0.5 * tol, depth - 1, 0.5 * gap);
    }

    const std::function<Eigen::VectorXd(double)>& g_;
    QuadratureSpec quad_;
};

} // namespace

ForcingResult forcing(const FamilyModel& model, const Eigen::VectorXd& alpha, double T,
                      double T_max, int cells, const QuadratureSpec& quad, FitMode mode,
                      const DetFloor& floor, double y_scale) {
    const int n = model.n();
    auto integrand = [&](double t) -> Eigen::VectorXd {
        Eigen::MatrixXd Jinv = jacobian_inverse(model.jacobian(t, alpha), floor.at(t));
        return y_scale * (Jinv * model.residual(t, alpha));
    };

    auto nodes = geometric_grid(T, T_max, cells);

    // Decay of the integrand near the truncation point decides the tail.
    double fit_lo = T_max / 100.0 >= T * (1.0 + 1e-12) ? T_max / 100.0 : T;
    if (fit_lo * 10.0 > T_max) fit_lo = T_max / 10.0; // keep ratio >= 10
    ExponentFit decay = estimate_exponent([&](double t) { return integrand(t).norm(); },
                                          {fit_lo, T_max}, 200, mode);

    ForcingResult res;
    res.tail_value = Eigen::VectorXd::Zero(n);
    if (decay.degenerate) {
        // Residual numerically zero: Z == 0.
        std::vector<Eigen::VectorXd> vals(nodes.size(), Eigen::VectorXd::Zero(n));
        res.Z = GridFunction(std::move(nodes), std::move(vals));
        res.integrand_slope = -std::numeric_limits<double>::infinity();
        return res;
    }
    double beta = decay.slope;
    if (beta >= -1.0)
        throw NonConvergentTail("integrand of Z decays like t^" + std::to_string(beta) +
                                "; integral over [T, inf) does not converge");
    res.integrand_slope = beta;

    // Secular tail: average the t^{-beta}-compensated integrand over the top
    // decade (oscillatory components cancel in the mean) and close the
    // integral analytically. The envelope maximum certifies the bound.
    {
        const int m = 200;
        auto ts = geometric_grid(fit_lo, T_max, m - 1);
        Eigen::VectorXd cmean = Eigen::VectorXd::Zero(n);
        double cmax = 0.0;
        for (double t : ts) {
            Eigen::VectorXd g = integrand(t) * std::pow(t, -beta);
            cmean += g;
            cmax = std::max(cmax, g.norm());
        }
        cmean /= static_cast<double>(m);
        double scale = std::pow(T_max, beta + 1.0) / (-(beta + 1.0));
        res.tail_value = cmean * scale;
        res.tail_bound = cmax * std::fabs(scale);
    }

    // Cumulative quadrature from the truncation point down.
    std::vector<Eigen::VectorXd> vals(nodes.size());
    auto g_of_u = std::function<Eigen::VectorXd(double)>([&](double u) -> Eigen::VectorXd {
        double t = std::exp(u);
        return integrand(t) * t;
    });
    CellIntegrator ci(g_of_u, quad);
    vals.back() = res.tail_value;
    for (std::size_t i = nodes.size() - 1; i-- > 0;) {
        vals[i] = vals[i + 1] + ci.integrate(std::log(nodes[i]), std::log(nodes[i + 1]));
    }
    res.Z = GridFunction(std::move(nodes), std::move(vals));
    return res;
}

} // namespace asolv
