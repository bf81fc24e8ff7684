#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "asolv/expr.hpp"
#include "asolv/exponents.hpp"
#include "asolv/grid.hpp"

namespace asolv {

/// Axis-aligned box in R^n.
struct Box {
    std::vector<std::array<double, 2>> axes;

    int dim() const { return static_cast<int>(axes.size()); }
    bool contains(const Eigen::VectorXd& v) const;
    /// other strictly inside this box, componentwise with positive margin.
    bool strictly_contains(const Box& other) const;
    Eigen::VectorXd center() const;
};

/// The ODE dx/dt = t^k f(x, t) on t >= t0.
struct SystemDef {
    int n = 0;
    double k = 0.0;
    double t0 = 1.0;
    std::vector<Expr> f;
    std::optional<Box> domain_hint;

    /// Checks n >= 1, k >= 0, t0 > 0 and that f references only x1..xn, t.
    void validate() const;
};

/// Candidate n-parametric family X(t; alpha).
struct AsymptoticFamily {
    std::vector<Expr> X;
    Box A0;      // open parameter domain
    Box compact; // closed box strictly inside A0

    void validate(int n) const;
};

/// Inverse by LU with partial pivoting; throws SingularJacobian when
/// |det J| < det_floor (the family is parameter-degenerate there).
Eigen::MatrixXd jacobian_inverse(const Eigen::MatrixXd& J, double det_floor);

/// t-dependent determinant floor |det| >= coeff * t^p.
struct DetFloor {
    double coeff = 1e-10;
    double p = 0.0;
    double at(double t) const;
};

/// Pairs a system with a family and precomputes the symbolic artifacts of
/// the construction: dX/dt, the residual Y, J = dX/da, dJ/dt, d_alpha Y
/// (via composition, independent of the Jacobian identity) and df/dx.
/// All evaluation methods are pure and safe to call concurrently.
class FamilyModel {
public:
    FamilyModel(SystemDef sys, AsymptoticFamily fam);

    const SystemDef& system() const { return sys_; }
    const AsymptoticFamily& family() const { return fam_; }
    int n() const { return sys_.n; }

    Eigen::VectorXd X_value(double t, const Eigen::VectorXd& alpha) const;
    Eigen::VectorXd dXdt_value(double t, const Eigen::VectorXd& alpha) const;
    Eigen::VectorXd f_value(const Eigen::VectorXd& x, double t) const;

    /// Y(t; alpha) = dX/dt - t^k f(X, t), with symbolic dX/dt.
    Eigen::VectorXd residual(double t, const Eigen::VectorXd& alpha) const;

    /// J(t; alpha) = dX/dalpha, entrywise symbolic.
    Eigen::MatrixXd jacobian(double t, const Eigen::VectorXd& alpha) const;
    Eigen::MatrixXd jacobian_dt(double t, const Eigen::VectorXd& alpha) const;

    /// d_alpha Y, computed by differentiating the composed residual
    /// expression in alpha.
    Eigen::MatrixXd d_alpha_residual(double t, const Eigen::VectorXd& alpha) const;

    /// M0 = df/dx evaluated at (X(t; alpha), t).
    Eigen::MatrixXd linearization(double t, const Eigen::VectorXd& alpha) const;
    Eigen::MatrixXd linearization_at(const Eigen::VectorXd& x, double t) const;

    /// G(R, t) = f(X+R, t) - f(X, t) - df/dx(X, t) R.
    Eigen::VectorXd nonlinear_part(double t, const Eigen::VectorXd& alpha,
                                   const Eigen::VectorXd& R) const;

    /// M(t) = -J^{-1} d_alpha Y.
    Eigen::MatrixXd reduced_matrix(double t, const Eigen::VectorXd& alpha,
                                   const DetFloor& floor = {}) const;

private:
    SystemDef sys_;
    AsymptoticFamily fam_;
    std::vector<Expr> dXdt_;                 // n
    std::vector<Expr> Y_;                    // n, composed
    std::vector<std::vector<Expr>> J_;       // n x n, [i][j] = dX_i/da_j
    std::vector<std::vector<Expr>> dJdt_;    // n x n
    std::vector<std::vector<Expr>> dYdA_;    // n x n, [i][j] = dY_i/da_j
    std::vector<std::vector<Expr>> dfdx_;    // n x n, in (x, t)
};

struct QuadratureSpec {
    double rel_tol = 1e-8;
    int max_depth = 24;
    // Fastest oscillation frequency of the integrand, if any. Cells are
    // pre-split to ~8 subintervals per period before the adaptive error
    // test, so periodic cancellation cannot fake convergence.
    std::optional<double> phase_scale;
};

/// Z(t) = int_t^inf J^{-1} Y deta on a geometric grid over [T, T_max].
/// The integral is truncated at T_max; the tail is closed analytically
/// from a power-law fit of the integrand over the top decade (secular
/// component only), and tail_bound certifies the size of what was closed.
struct ForcingResult {
    GridFunction Z;
    Eigen::VectorXd tail_value; // added to every node
    double tail_bound = 0.0;    // envelope bound on the tail magnitude
    double integrand_slope = 0.0;
};

ForcingResult forcing(const FamilyModel& model, const Eigen::VectorXd& alpha, double T,
                      double T_max, int cells, const QuadratureSpec& quad,
                      FitMode mode = FitMode::Auto, const DetFloor& floor = {},
                      double y_scale = 1.0);

} // namespace asolv
