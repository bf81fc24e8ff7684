#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "asolv/errors.hpp"

namespace asolv {

class FamilyModel;

/// Fit window [t_lo, t_hi] for log-log regression; t_hi/t_lo >= 10.
struct FitWindow {
    double t_lo = 10.0;
    double t_hi = 1e4;
};

enum class FitMode { Auto, Raw, Envelope };

/// Result of a log-log slope fit. A degenerate sample (the function is
/// numerically zero) is reported with slope -inf rather than an error.
struct ExponentFit {
    double slope = 0.0;
    double half_width = 0.0; // 2x standard error, floored (see ProfileOptions)
    double intercept = 0.0;  // log g ~ intercept + slope log t
    bool degenerate = false;
    bool envelope_used = false;
};

/// Least-squares slope of log(sampler) vs log t on a geometric grid.
/// Envelope mode regresses on running maxima over sliding one-decade
/// sub-windows (for oscillatory magnitudes). Auto mode switches to the
/// envelope when the raw-fit residuals have lag-1 autocorrelation > 0.5.
ExponentFit estimate_exponent(const std::function<double(double)>& sampler, FitWindow window,
                              int points, FitMode mode, double half_width_floor = 1e-9);

/// Same fit on already-sampled magnitudes g_i > 0 at geometric times t_i.
ExponentFit fit_loglog(const std::vector<double>& t, const std::vector<double>& g, FitMode mode,
                       double half_width_floor = 1e-9);

struct FittedExponent {
    double value = 0.0;
    double half_width = 0.0;
    bool degenerate = false;
};

/// Measured orders of det J, J, J^{-1}, d_alpha Y relative to Y, and of
/// the residual itself, as powers of t; lambda and nu are always derived
/// from (mu, r, q), never stored.
struct ExponentProfile {
    double k = 0.0;
    FittedExponent p, q, r, s, mu;
    double a = 0.0; // leading coefficient of det J * t^{-p}

    double lambda() const { return mu.value - r.value - 1.0; }
    double nu() const { return mu.value - r.value - q.value - 1.0; }
};

struct ProfileOptions {
    int points = 360;
    FitMode mode = FitMode::Auto;
    double half_width_floor = 1e-9; // exponents are never claimed sharper than this
    double det_floor_coeff = 1e-10;
};

/// Fit the full exponent profile on the pointwise maximum over an
/// alpha grid (grid realization of uniformity in the parameters).
ExponentProfile profile(const FamilyModel& model, const std::vector<Eigen::VectorXd>& alpha_grid,
                        FitWindow window, const ProfileOptions& opt = {});

/// Theorem hypotheses, gated conservatively: fitted values are shifted by
/// their half-widths so a pass verdict is robust to fit noise. Margins are
/// the literal shifted differences; both inequalities are strict.
struct ConditionReport {
    bool cond1 = false; // mu > r + s + 1
    bool cond2 = false; // mu > 2(r + q + 1) + k
    double margin1 = 0.0;
    double margin2 = 0.0;
    double nu = 0.0;
    bool exact_family = false; // residual identically zero, conditions vacuous
    bool verdict = false;
};

ConditionReport check_conditions(const ExponentProfile& prof);

/// p <= q n + tol and r <= q(n-1) - p + tol, tol = sum of the involved
/// confidence half-widths.
struct RelationReport {
    double lhs1 = 0.0, rhs1 = 0.0, tol1 = 0.0;
    double lhs2 = 0.0, rhs2 = 0.0, tol2 = 0.0;
    bool rel1 = false, rel2 = false;
    bool holds() const { return rel1 && rel2; }
};

RelationReport check_relations(const ExponentProfile& prof, int n);

/// Default alpha grid for uniformity: per-axis {lo, mid, hi} corners+center
/// of the compact (3^n points).
std::vector<Eigen::VectorXd> default_alpha_grid(const std::vector<std::array<double, 2>>& compact);

} // namespace asolv
