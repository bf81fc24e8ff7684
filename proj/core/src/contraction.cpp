#include "asolv/contraction.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace asolv {

double weighted_norm(const GridFunction& g, double lambda) {
    if (g.size() == 0) throw ValidationError("weighted_norm: empty grid");
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        m = std::max(m, std::pow(g.times()[i], lambda) * g.values()[i].norm());
    return m;
}

void ContractionSetup::validate() const {
    if (!(L_K < 0.5) || !(L0 < 0.5))
        throw ThresholdNotFound("contraction setup invalid: L_K=" + std::to_string(L_K) +
                                ", L0=" + std::to_string(L0) + " (both must be < 1/2)");
    if (!(T_max > T) || cells < 1)
        throw ValidationError("contraction setup: bad grid parameters");
}

double estimate_MK(const FamilyModel& model, const Eigen::VectorXd& alpha, double radius,
                   int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = model.n();
    const double t0 = model.system().t0;
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        double t = t0 * std::pow(100.0, unit(rng));
        Eigen::VectorXd dir(n);
        for (int j = 0; j < n; ++j) dir[j] = gauss(rng);
        double len = dir.norm();
        if (len == 0.0) continue;
        double rr = radius * std::pow(unit(rng), 1.0 / n);
        Eigen::VectorXd R = dir * (rr / len);
        double ratio = model.nonlinear_part(t, alpha, R).norm() / (rr * rr);
        worst = std::max(worst, ratio);
    }
    return 1.5 * worst;
}

double estimate_M1(const FamilyModel& model, const Eigen::VectorXd& alpha,
                   const ExponentProfile& prof, FitWindow window, const DetFloor& floor) {
    if (prof.mu.degenerate) return 0.0;
    double expo = prof.mu.value - prof.r.value - prof.s.value;
    auto ts = geometric_grid(window.t_lo, window.t_hi, 199);
    double worst = 0.0;
    for (double t : ts)
        worst = std::max(worst, model.reduced_matrix(t, alpha, floor).norm() * std::pow(t, expo));
    return 1.5 * worst;
}

ContractionSetup select_T(const ExponentProfile& prof, double M_K, double M1, double K, double t0,
                          const SolverOptions& opt) {
    const double lambda = prof.lambda();
    const double eLK = prof.k + 2.0 * (prof.r.value + prof.q.value + 1.0) - prof.mu.value;
    const double eL0 = prof.r.value + prof.s.value + 1.0 - prof.mu.value;
    const double denom = std::fabs(prof.r.value + prof.s.value - prof.mu.value - lambda + 1.0);
    if (M_K > 0.0 && !(eLK < 0.0))
        throw ThresholdNotFound("L_K exponent k+2(r+q+1)-mu = " + std::to_string(eLK) +
                                " is not negative; theorem conditions violated");
    if (M1 > 0.0 && (!(eL0 < 0.0) || denom == 0.0))
        throw ThresholdNotFound("L0 exponent r+s+1-mu = " + std::to_string(eL0) +
                                " is not negative; theorem conditions violated");

    for (int j = 0; j <= 20; ++j) {
        double T = t0 * std::pow(2.0, j);
        double L_K = M_K > 0.0 ? M_K * 2.0 * K * std::pow(T, eLK) : 0.0;
        double L0 = M1 > 0.0 ? M1 * std::pow(T, eL0) / denom : 0.0;
        if (L_K < 0.5 && L0 < 0.5) {
            ContractionSetup s;
            s.T = T;
            s.T_max = T * opt.tmax_factor;
            s.lambda = lambda;
            s.K = K;
            s.M_K = M_K;
            s.M1 = M1;
            s.L_K = L_K;
            s.L0 = L0;
            s.picard_tol = opt.picard_tol;
            s.max_iters = opt.max_iters;
            double du = std::log(10.0) / opt.points_per_decade;
            s.cells = std::max(32, static_cast<int>(std::ceil(std::log(s.T_max / s.T) / du)));
            s.validate();
            return s;
        }
    }
    throw ThresholdNotFound("no T = t0*2^j with j <= 20 makes both Lipschitz factors < 1/2; "
                            "constants too large or conditions too marginal");
}

// ---------------------------------------------------------------------------
// PicardOperator
// ---------------------------------------------------------------------------

PicardOperator::Point PicardOperator::make_point(const FamilyModel& model,
                                                 const Eigen::VectorXd& alpha, double t,
                                                 const DetFloor& floor) const {
    Point p;
    p.t = t;
    p.tk = std::pow(t, k_);
    p.X = model.X_value(t, alpha);
    p.fX = model.f_value(p.X, t);
    p.J = model.jacobian(t, alpha);
    p.Jinv = jacobian_inverse(p.J, floor.at(t));
    p.M0 = model.linearization_at(p.X, t);
    p.M = -p.Jinv * model.d_alpha_residual(t, alpha);
    return p;
}

PicardOperator::PicardOperator(const ContractionSetup& setup, const FamilyModel& model,
                               const Eigen::VectorXd& alpha, const SolverOptions& opt)
    : n_(model.n()), k_(model.system().k) {
    setup.validate();
    QuadratureSpec quad = opt.quad;
    if (!quad.phase_scale) quad.phase_scale = opt.phase_scale;
    ForcingResult fr = forcing(model, alpha, setup.T, setup.T_max, setup.cells, quad,
                               opt.fit_mode, opt.det_floor);
    Z_ = std::move(fr.Z);
    tail_bound_ = fr.tail_bound;
    times_ = Z_.times();
    du_ = std::log(times_[1] / times_[0]);

    const std::size_t m = times_.size() - 1;
    nodes_.reserve(m + 1);
    mids_.reserve(m);
    X_node_.reserve(m + 1);
    J_node_.reserve(m + 1);
    for (std::size_t i = 0; i <= m; ++i) {
        nodes_.push_back(make_point(model, alpha, times_[i], opt.det_floor));
        X_node_.push_back(nodes_.back().X);
        J_node_.push_back(nodes_.back().J);
        if (i < m) mids_.push_back(make_point(model, alpha, std::sqrt(times_[i] * times_[i + 1]),
                                              opt.det_floor));
    }
    // The model itself is only needed during construction; f is required at
    // shifted states during apply(), so keep a handle.
    model_ = &model;
}

namespace {

// Cubic interpolation at the midpoint of cell i on a uniform index grid
// (matches GridFunction's Catmull-Rom with one-sided boundary slopes).
Eigen::VectorXd mid_value(const std::vector<Eigen::VectorXd>& v, std::size_t i) {
    const std::size_t m = v.size() - 1;
    const Eigen::VectorXd& p1 = v[i];
    const Eigen::VectorXd& p2 = v[i + 1];
    Eigen::VectorXd m1 = (i > 0) ? Eigen::VectorXd(0.5 * (p2 - v[i - 1])) : Eigen::VectorXd(p2 - p1);
    Eigen::VectorXd m2 =
        (i + 2 <= m) ? Eigen::VectorXd(0.5 * (v[i + 2] - p1)) : Eigen::VectorXd(p2 - p1);
    return 0.5 * (p1 + p2) + 0.125 * (m1 - m2);
}

} // namespace

GridFunction PicardOperator::apply(const GridFunction& C) const {
    if (C.size() != times_.size())
        throw ValidationError("PicardOperator::apply: grid mismatch");
    const std::size_t m = times_.size() - 1;
    const auto& cv = C.values();

    auto integrand = [&](const Point& p, const Eigen::VectorXd& Cval) -> Eigen::VectorXd {
        Eigen::VectorXd R = p.J * Cval;
        Eigen::VectorXd G = model_->f_value(p.X + R, p.t) - p.fX - p.M0 * R;
        return (p.M * Cval + p.tk * (p.Jinv * G)) * p.t; // * t: du measure
    };

    std::vector<Eigen::VectorXd> W_node(m + 1), W_mid(m);
    for (std::size_t i = 0; i <= m; ++i) W_node[i] = integrand(nodes_[i], cv[i]);
    for (std::size_t i = 0; i < m; ++i) W_mid[i] = integrand(mids_[i], mid_value(cv, i));

    // I_i = int_{t_i}^{T_max}, Simpson per cell, accumulated from the top.
    std::vector<Eigen::VectorXd> out(m + 1);
    Eigen::VectorXd I = Eigen::VectorXd::Zero(n_);
    out[m] = Z_.values()[m] - I;
    for (std::size_t i = m; i-- > 0;) {
        I += (du_ / 6.0) * (W_node[i] + 4.0 * W_mid[i] + W_node[i + 1]);
        out[i] = Z_.values()[i] - I;
    }
    return GridFunction(times_, std::move(out));
}

RemainderSolution picard_solve(const ContractionSetup& setup, const FamilyModel& model,
                               const Eigen::VectorXd& alpha, const SolverOptions& opt) {
    setup.validate();
    PicardOperator op(setup, model, alpha, opt);

    GridFunction C = op.Z();
    RemainderSolution sol;
    sol.tail_bound = op.tail_bound();

    double prev_norm = weighted_norm(C, setup.lambda);
    bool converged = false;
    for (int it = 1; it <= setup.max_iters; ++it) {
        GridFunction next = op.apply(C);
        double delta = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i)
            delta = std::max(delta, std::pow(next.times()[i], setup.lambda) *
                                        (next.values()[i] - C.values()[i]).norm());
        double norm_next = weighted_norm(next, setup.lambda);
        if (norm_next > setup.K)
            throw BallEscape("iterate " + std::to_string(it) + " has ||C||_lambda = " +
                             std::to_string(norm_next) + " > K = " + std::to_string(setup.K));
        sol.increment_norms.push_back(delta);
        sol.iterations = it;
        sol.final_delta = delta;
        C = std::move(next);
        if (delta <= setup.picard_tol * std::max(1.0, prev_norm)) {
            converged = true;
            prev_norm = norm_next;
            break;
        }
        prev_norm = norm_next;
    }
    if (!converged)
        throw NoConvergence("Picard iteration did not reach tol " +
                            std::to_string(setup.picard_tol) + " in " +
                            std::to_string(setup.max_iters) + " iterations (last increment " +
                            std::to_string(sol.final_delta) + ")");
    sol.norm_C = prev_norm;

    // R = J C exactly at the nodes.
    std::vector<Eigen::VectorXd> rv(C.size());
    for (std::size_t i = 0; i < C.size(); ++i) rv[i] = op.jacobian_at_node(i) * C.values()[i];
    sol.R = GridFunction(C.times(), std::move(rv));
    sol.C = std::move(C);
    return sol;
}

AssembledSolution assemble(const FamilyModel& model, const Eigen::VectorXd& alpha,
                           const RemainderSolution& sol, FitMode mode) {
    AssembledSolution as;
    const auto& ts = sol.R.times();
    std::vector<Eigen::VectorXd> xv(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i)
        xv[i] = model.X_value(ts[i], alpha) + sol.R.values()[i];
    as.x = GridFunction(ts, std::move(xv));

    // Fitted decay of |x - X| = |R| over the top two decades.
    double hi = ts.back();
    double lo = std::max(ts.front(), hi / 100.0);
    if (hi < lo * 10.0) lo = hi / 10.0;
    ExponentFit fit = estimate_exponent([&](double t) { return sol.R(t).norm(); }, {lo, hi}, 200,
                                        mode);
    if (fit.degenerate) {
        as.degenerate = true;
        as.decay_slope = -std::numeric_limits<double>::infinity();
        as.decay_c = 0.0;
    } else {
        as.decay_slope = fit.slope;
        as.decay_c = std::exp(fit.intercept);
    }
    return as;
}

} // namespace asolv
