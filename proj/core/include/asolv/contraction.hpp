#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "asolv/exponents.hpp"
#include "asolv/family.hpp"
#include "asolv/grid.hpp"

namespace asolv {

/// Grid-approximated sup_{t >= T} t^lambda |g(t)|.
double weighted_norm(const GridFunction& g, double lambda);

struct SolverOptions {
    double tmax_factor = 1e4;
    int points_per_decade = 200;
    std::optional<double> phase_scale; // fastest oscillation frequency, if any
    double picard_tol = 1e-10;
    int max_iters = 50;
    std::uint64_t seed = 0;
    double mk_radius = 0.1;
    int mk_samples = 500;
    QuadratureSpec quad;
    FitMode fit_mode = FitMode::Auto;
    DetFloor det_floor;
};

/// Everything the contraction needs: threshold T, weight lambda, ball
/// radius K and the constants entering the two Lipschitz factors.
/// Construction fails unless both factors are below 1/2.
struct ContractionSetup {
    double T = 0.0;
    double T_max = 0.0;
    double lambda = 0.0;
    double K = 0.0;
    double M_K = 0.0;
    double M1 = 0.0;
    double L_K = 0.0;
    double L0 = 0.0;
    double picard_tol = 1e-10;
    int max_iters = 50;
    int cells = 0;

    void validate() const;
};

/// Quadratic-bound constant of G: 1.5x the max of |G(R,t)|/|R|^2 over
/// random (t, R) with |R| <= radius. Deterministic for a fixed seed.
double estimate_MK(const FamilyModel& model, const Eigen::VectorXd& alpha, double radius,
                   int samples, std::uint64_t seed);

/// Constant in |M(t)| <= M1 t^{r+s-mu}: 1.5x the max over a sample grid of
/// |M(t)| t^{mu-r-s}.
double estimate_M1(const FamilyModel& model, const Eigen::VectorXd& alpha,
                   const ExponentProfile& prof, FitWindow window, const DetFloor& floor);

/// Smallest T in {t0 2^j, j = 0..20} with L_K < 1/2 and L0 < 1/2, where
///   L_K = M_K 2K T^{k+2(r+q+1)-mu},  L0 = M1 T^{r+s+1-mu} / |r+s-mu-lambda+1|.
ContractionSetup select_T(const ExponentProfile& prof, double M_K, double M1, double K, double t0,
                          const SolverOptions& opt = {});

/// The integral operator C -> Z + int_inf^t [M C + t^k J^{-1} G(J C, .)].
/// Precomputes all family quantities on the grid once; apply() is then
/// cheap enough to iterate.
class PicardOperator {
public:
    PicardOperator(const ContractionSetup& setup, const FamilyModel& model,
                   const Eigen::VectorXd& alpha, const SolverOptions& opt = {});

    GridFunction apply(const GridFunction& C) const;

    const GridFunction& Z() const { return Z_; }
    double tail_bound() const { return tail_bound_; }
    const std::vector<double>& times() const { return times_; }
    const Eigen::MatrixXd& jacobian_at_node(std::size_t i) const { return J_node_[i]; }
    Eigen::VectorXd X_at_node(std::size_t i) const { return X_node_[i]; }

private:
    struct Point {
        double t, tk;
        Eigen::VectorXd X, fX;
        Eigen::MatrixXd J, Jinv, M0, M;
    };

    Point make_point(const FamilyModel& model, const Eigen::VectorXd& alpha, double t,
                     const DetFloor& floor) const;

    const FamilyModel* model_ = nullptr;
    int n_ = 0;
    double k_ = 0.0;
    std::vector<double> times_;       // nodes
    std::vector<Point> nodes_, mids_; // mids_[i] between nodes i, i+1
    std::vector<Eigen::VectorXd> X_node_;
    std::vector<Eigen::MatrixXd> J_node_;
    GridFunction Z_;
    double tail_bound_ = 0.0;
    double du_ = 0.0;
};

/// Converged remainder in C-space and R-space (R = J C at the nodes).
struct RemainderSolution {
    GridFunction C;
    GridFunction R;
    int iterations = 0;
    double final_delta = 0.0;
    double tail_bound = 0.0;
    double norm_C = 0.0;
    std::vector<double> increment_norms;
};

RemainderSolution picard_solve(const ContractionSetup& setup, const FamilyModel& model,
                               const Eigen::VectorXd& alpha, const SolverOptions& opt = {});

/// x = X + R on the grid, with the fitted decay law |x - X| ~ c t^{slope}.
struct AssembledSolution {
    GridFunction x;
    double decay_slope = 0.0;
    double decay_c = 0.0;
    bool degenerate = false; // remainder numerically zero
};

AssembledSolution assemble(const FamilyModel& model, const Eigen::VectorXd& alpha,
                           const RemainderSolution& sol, FitMode mode = FitMode::Auto);

} // namespace asolv
