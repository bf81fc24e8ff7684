#include "asolv/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace asolv {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                 e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
// Dense-output weights (Hairer-Norsett-Wanner).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct DenseSegment {
    double t0, h;
    Eigen::VectorXd r1, r2, r3, r4, r5;

    Eigen::VectorXd eval(double t) const {
        double th = (t - t0) / h;
        double th1 = 1.0 - th;
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
    }
};

class Rhs {
public:
    explicit Rhs(const SystemDef& sys) : sys_(sys) {}

    Eigen::VectorXd operator()(double t, const Eigen::VectorXd& x) const {
        double tk = sys_.k == 0.0 ? 1.0 : std::pow(t, sys_.k);
        Eigen::VectorXd out(sys_.n);
        for (int i = 0; i < sys_.n; ++i)
            out[i] = tk * eval(sys_.f[static_cast<std::size_t>(i)], t, x, empty_);
        return out;
    }

private:
    const SystemDef& sys_;
    Eigen::VectorXd empty_;
};

Trajectory integrate_core(const SystemDef& sys, double t_start, const Eigen::VectorXd& x_start,
                          double t_end, const IntegrateOptions& opt,
                          const std::vector<double>* monitor,
                          std::vector<Eigen::VectorXd>* monitor_out) {
    sys.validate();
    if (x_start.size() != sys.n)
        throw ValidationError("integrate: state dimension mismatch");
    if (!x_start.allFinite()) throw ValidationError("integrate: non-finite start state");

    Rhs rhs(sys);
    const double dir = t_end >= t_start ? 1.0 : -1.0;
    const double span = std::fabs(t_end - t_start);

    Trajectory traj;
    traj.rtol = opt.rtol;
    traj.atol = opt.atol;

    double t = t_start;
    Eigen::VectorXd y = x_start;
    Eigen::VectorXd k1 = rhs(t, y);

    auto record = [&](double tt, const Eigen::VectorXd& yy) {
        if (opt.store_trajectory || traj.times.empty()) {
            traj.times.push_back(tt);
            traj.states.push_back(yy);
        } else {
            traj.times.back() = tt;
            traj.states.back() = yy;
        }
    };
    record(t, y);

    std::size_t mon_idx = 0;
    auto drain_monitor = [&](const DenseSegment& seg, double t_new) {
        if (!monitor) return;
        while (mon_idx < monitor->size() &&
               dir * ((*monitor)[mon_idx] - t_new) <= 1e-12 * std::fabs(t_new)) {
            monitor_out->push_back(seg.eval((*monitor)[mon_idx]));
            ++mon_idx;
        }
    };

    double h;
    if (opt.fixed_step > 0.0) {
        h = dir * opt.fixed_step;
    } else {
        h = dir * std::min(span, std::max(1e-6 * span, 1e-2));
    }
    double err_prev = 1.0;

    if (span == 0.0) return traj;

    Eigen::VectorXd k2, k3, k4, k5, k6, k7, y5;
    for (std::size_t step = 0;; ++step) {
        if (step >= opt.max_steps)
            throw StepUnderflow("integrate: step budget exhausted before reaching t_end");
        bool last = dir * (t + h - t_end) >= 0.0;
        if (last) h = t_end - t;
        if (std::fabs(h) < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(t)))
            throw StepUnderflow("integrate: step size underflow at t = " + std::to_string(t));

        k2 = rhs(t + c2 * h, y + h * (a21 * k1));
        k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
        k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        k6 = rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        k7 = rhs(t + h, y5);

        Eigen::VectorXd errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = 0.0;
        for (int i = 0; i < sys.n; ++i) {
            double sc = opt.atol + opt.rtol * std::max(std::fabs(y[i]), std::fabs(y5[i]));
            double q = errv[i] / sc;
            err += q * q;
        }
        err = std::sqrt(err / sys.n);

        bool accept = opt.fixed_step > 0.0 || (std::isfinite(err) && err <= 1.0);

        if (accept) {
            DenseSegment seg;
            seg.t0 = t;
            seg.h = h;
            seg.r1 = y;
            seg.r2 = y5 - y;
            seg.r3 = h * k1 - seg.r2;
            seg.r4 = seg.r2 - h * k7 - seg.r3;
            seg.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

            t += h;
            y = y5;
            k1 = k7; // FSAL
            ++traj.steps_accepted;
            traj.max_err_ratio = std::max(traj.max_err_ratio, err);
            drain_monitor(seg, t);
            record(t, y);
            if (sys.domain_hint && !sys.domain_hint->contains(y))
                throw DomainExit("integrate: state left the domain hint at t = " +
                                 std::to_string(t));
            if (last) break;
        } else {
            ++traj.steps_rejected;
        }

        if (opt.fixed_step == 0.0) {
            double fac;
            if (!std::isfinite(err)) {
                fac = 0.2;
            } else {
                double e = std::max(err, 1e-10);
                fac = 0.9 * std::pow(e, -0.17) * std::pow(err_prev, 0.04);
                fac = std::clamp(fac, 0.2, 5.0);
            }
            if (accept) err_prev = std::max(std::isfinite(err) ? err : 1.0, 1e-10);
            h *= fac;
        }
    }
    return traj;
}

} // namespace

Trajectory integrate_reference(const SystemDef& sys, double t_start, const Eigen::VectorXd& x_start,
                               double t_end, const IntegrateOptions& opt) {
    return integrate_core(sys, t_start, x_start, t_end, opt, nullptr, nullptr);
}

Trajectory integrate_with_monitor(const SystemDef& sys, double t_start,
                                  const Eigen::VectorXd& x_start, double t_end,
                                  const IntegrateOptions& opt,
                                  const std::vector<double>& monitor_times,
                                  std::vector<Eigen::VectorXd>& monitor_states) {
    monitor_states.clear();
    monitor_states.reserve(monitor_times.size());
    Trajectory traj = integrate_core(sys, t_start, x_start, t_end, opt, &monitor_times,
                                     &monitor_states);
    // Monitor points that coincide with t_end (within rounding) may remain.
    while (monitor_states.size() < monitor_times.size() &&
           std::fabs(monitor_times[monitor_states.size()] - t_end) <=
               1e-9 * std::max(1.0, std::fabs(t_end)))
        monitor_states.push_back(traj.final_state());
    if (monitor_states.size() != monitor_times.size())
        throw Error("integrate_with_monitor: monitor times not covered by the integration span");
    return traj;
}

DecayFit compare_decay(const FamilyModel& model, const Eigen::VectorXd& alpha,
                       const GridFunction& assembled, double nu, const IntegrateOptions& opt,
                       FitMode mode) {
    const double T = assembled.t_front();
    const double T_max = assembled.t_back();
    double lo = std::max(T, T_max / 100.0);
    if (T_max < lo * 10.0) lo = T_max / 10.0;

    // Descending monitor times for the backward integration.
    const int points = 200;
    auto ts = geometric_grid(lo, T_max, points - 1);
    std::vector<double> monitor(ts.rbegin(), ts.rend());

    std::vector<Eigen::VectorXd> states;
    IntegrateOptions o = opt;
    o.store_trajectory = false;
    integrate_with_monitor(model.system(), T_max, assembled.values().back(), lo, o, monitor,
                           states);

    std::vector<double> tt, mm;
    double worst = 0.0;
    for (std::size_t i = 0; i < monitor.size(); ++i) {
        double m = (states[i] - model.X_value(monitor[i], alpha)).norm();
        worst = std::max(worst, m);
        tt.push_back(monitor[i]);
        mm.push_back(m);
    }
    std::reverse(tt.begin(), tt.end());
    std::reverse(mm.begin(), mm.end());

    DecayFit out;
    if (worst < 10.0 * opt.atol) {
        out.degenerate = true;
        out.slope = -std::numeric_limits<double>::infinity();
        return out;
    }
    ExponentFit fit = fit_loglog(tt, mm, mode);
    if (fit.degenerate) {
        out.degenerate = true;
        out.slope = -std::numeric_limits<double>::infinity();
        return out;
    }
    out.slope = fit.slope;
    std::vector<double> cs;
    for (std::size_t i = 0; i < tt.size(); ++i)
        if (mm[i] > 0) cs.push_back(mm[i] * std::pow(tt[i], nu));
    std::nth_element(cs.begin(), cs.begin() + static_cast<std::ptrdiff_t>(cs.size() / 2), cs.end());
    out.c = cs[cs.size() / 2];
    return out;
}

UniformityReport sweep_uniformity(const FamilyModel& model,
                                  const std::vector<Eigen::VectorXd>& alpha_samples,
                                  const AssembleFn& builder, double nu,
                                  const IntegrateOptions& opt, FitMode mode) {
    if (alpha_samples.size() < 5)
        throw ValidationError("sweep_uniformity: need at least 5 alpha samples spanning the "
                              "compact (corners included)");
    UniformityReport rep;
    bool any_failed = false;
    for (const auto& a : alpha_samples) {
        UniformityReport::Entry e;
        e.alpha = a;
        try {
            AssembledSolution as = builder(a);
            if (as.degenerate) {
                e.degenerate = true;
                e.slope = -std::numeric_limits<double>::infinity();
            } else {
                DecayFit df = compare_decay(model, a, as.x, nu, opt, mode);
                e.degenerate = df.degenerate;
                e.slope = df.slope;
                e.c = df.c;
            }
        } catch (const Error& err) {
            e.failed = true;
            e.error = err.what();
            any_failed = true;
        }
        rep.entries.push_back(std::move(e));
    }

    std::vector<double> cs;
    bool slopes_ok = true;
    for (const auto& e : rep.entries) {
        if (e.failed) continue;
        if (!e.degenerate) {
            cs.push_back(e.c);
            if (!(e.slope <= -nu + 0.15)) slopes_ok = false;
        }
    }
    if (!cs.empty()) {
        rep.max_c = *std::max_element(cs.begin(), cs.end());
        std::nth_element(cs.begin(), cs.begin() + static_cast<std::ptrdiff_t>(cs.size() / 2),
                         cs.end());
        rep.median_c = cs[cs.size() / 2];
        rep.constant_ratio = rep.median_c > 0.0 ? rep.max_c / rep.median_c
                                                : std::numeric_limits<double>::infinity();
    }
    bool constants_ok = cs.empty() || rep.constant_ratio <= 10.0;
    rep.verdict = !any_failed && slopes_ok && constants_ok;
    return rep;
}

std::vector<Eigen::VectorXd> default_sweep_samples(const Box& compact) {
    const int n = compact.dim();
    const int per_axis = n == 1 ? 5 : 3;
    std::vector<Eigen::VectorXd> out;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    for (;;) {
        Eigen::VectorXd a(n);
        for (int i = 0; i < n; ++i) {
            const auto& ax = compact.axes[static_cast<std::size_t>(i)];
            double frac = static_cast<double>(idx[static_cast<std::size_t>(i)]) / (per_axis - 1);
            a[i] = ax[0] + frac * (ax[1] - ax[0]);
        }
        out.push_back(a);
        int d = 0;
        while (d < n && ++idx[static_cast<std::size_t>(d)] == per_axis) {
            idx[static_cast<std::size_t>(d)] = 0;
            ++d;
        }
        if (d == n) break;
    }
    return out;
}

} // namespace asolv
