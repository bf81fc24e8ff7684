#include "asolv/exponents.hpp"

#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "asolv/family.hpp"

namespace asolv {

namespace {

constexpr double kZeroLevel = 1e-300;
const double kNegInf = -std::numeric_limits<double>::infinity();

struct LogSamples {
    std::vector<double> u; // log t
    std::vector<double> y; // log g
};

ExponentFit fit_line(const LogSamples& s, double half_width_floor, bool envelope_used) {
    const auto N = s.u.size();
    ExponentFit fit;
    fit.envelope_used = envelope_used;
    if (N < 3) {
        fit.degenerate = true;
        fit.slope = kNegInf;
        return fit;
    }
    double su = 0, sy = 0;
    for (std::size_t i = 0; i < N; ++i) {
        su += s.u[i];
        sy += s.y[i];
    }
    double mu = su / static_cast<double>(N), my = sy / static_cast<double>(N);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < N; ++i) {
        sxx += (s.u[i] - mu) * (s.u[i] - mu);
        sxy += (s.u[i] - mu) * (s.y[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mu;
    double ssr = 0;
    for (std::size_t i = 0; i < N; ++i) {
        double e = s.y[i] - (fit.intercept + fit.slope * s.u[i]);
        ssr += e * e;
    }
    double var = ssr / static_cast<double>(N - 2);
    fit.half_width = std::max(2.0 * std::sqrt(var / sxx), half_width_floor);
    return fit;
}

double residual_autocorr(const LogSamples& s, const ExponentFit& fit) {
    double num = 0, den = 0, prev = 0;
    bool have_prev = false;
    for (std::size_t i = 0; i < s.u.size(); ++i) {
        double e = s.y[i] - (fit.intercept + fit.slope * s.u[i]);
        den += e * e;
        if (have_prev) num += e * prev;
        prev = e;
        have_prev = true;
    }
    return den > 0 ? num / den : 0.0;
}

} // namespace

ExponentFit fit_loglog(const std::vector<double>& t, const std::vector<double>& g, FitMode mode,
                       double half_width_floor) {
    if (t.size() != g.size() || t.size() < 3)
        throw ValidationError("fit_loglog: need matching samples, at least 3");
    const int points = static_cast<int>(t.size());
    std::vector<double> us(t.size());
    std::vector<double> gs = g;
    int zeros = 0;
    for (int i = 0; i < points; ++i) {
        us[static_cast<std::size_t>(i)] = std::log(t[static_cast<std::size_t>(i)]);
        if (!(gs[static_cast<std::size_t>(i)] > kZeroLevel)) ++zeros;
    }
    const double u_lo = us.front(), u_hi = us.back();
    const double du = (u_hi - u_lo) / (points - 1);
    if (zeros > points / 2) {
        // Treat as exact zero: the quantity decays faster than any power.
        ExponentFit fit;
        fit.degenerate = true;
        fit.slope = kNegInf;
        return fit;
    }

    auto raw_samples = [&]() {
        LogSamples s;
        for (int i = 0; i < points; ++i) {
            if (gs[static_cast<std::size_t>(i)] > kZeroLevel) {
                s.u.push_back(us[static_cast<std::size_t>(i)]);
                s.y.push_back(std::log(gs[static_cast<std::size_t>(i)]));
            }
        }
        return s;
    };

    auto envelope_fit = [&]() {
        // Running maxima over sliding sub-windows of one decade (shrunk when
        // the window itself is short).
        double span = u_hi - u_lo;
        double wspan = std::min(std::log(10.0), span / 3.0);
        int wcount = std::max(2, static_cast<int>(std::ceil(wspan / du)));
        LogSamples s;
        for (int i = 0; i + wcount < points; ++i) {
            // The maximum is recorded at its argmax, not the window center:
            // for monotone magnitudes this degenerates gracefully to the raw
            // samples instead of shifting the intercept.
            double m = 0.0;
            int at = i;
            for (int j = i; j <= i + wcount; ++j) {
                if (gs[static_cast<std::size_t>(j)] > m) {
                    m = gs[static_cast<std::size_t>(j)];
                    at = j;
                }
            }
            if (m > kZeroLevel) {
                s.u.push_back(us[static_cast<std::size_t>(at)]);
                s.y.push_back(std::log(m));
            }
        }
        // Window-alignment bias of the running maxima dwarfs the regression
        // standard error; never claim envelope slopes sharper than 5e-3.
        return fit_line(s, std::max(half_width_floor, 5e-3), true);
    };

    if (mode == FitMode::Envelope) return envelope_fit();

    LogSamples s = raw_samples();
    ExponentFit raw = fit_line(s, half_width_floor, false);
    if (mode == FitMode::Raw || raw.degenerate) return raw;
    // Auto: oscillatory magnitudes leave strongly autocorrelated residuals.
    if (residual_autocorr(s, raw) > 0.5) return envelope_fit();
    return raw;
}

ExponentFit estimate_exponent(const std::function<double(double)>& sampler, FitWindow window,
                              int points, FitMode mode, double half_width_floor) {
    if (!(window.t_lo > 0.0) || !(window.t_hi >= window.t_lo * 10.0 * (1.0 - 1e-12)))
        throw ValidationError("estimate_exponent: window ratio must be >= 10");
    if (points < 20) throw ValidationError("estimate_exponent: need at least 20 points");
    const double u_lo = std::log(window.t_lo);
    const double du = (std::log(window.t_hi) - u_lo) / (points - 1);
    std::vector<double> ts(static_cast<std::size_t>(points)), gs(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        ts[static_cast<std::size_t>(i)] = std::exp(u_lo + du * i);
        gs[static_cast<std::size_t>(i)] = sampler(ts[static_cast<std::size_t>(i)]);
    }
    return fit_loglog(ts, gs, mode, half_width_floor);
}

// ---------------------------------------------------------------------------
// Profile over an alpha grid
// ---------------------------------------------------------------------------

namespace {

FittedExponent from_fit(const ExponentFit& f, double sign = 1.0) {
    FittedExponent e;
    e.degenerate = f.degenerate;
    e.value = f.degenerate ? sign * f.slope : sign * f.slope;
    e.half_width = f.half_width;
    return e;
}

} // namespace

std::vector<Eigen::VectorXd> default_alpha_grid(const std::vector<std::array<double, 2>>& compact) {
    const int n = static_cast<int>(compact.size());
    std::vector<Eigen::VectorXd> grid;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    for (;;) {
        Eigen::VectorXd a(n);
        for (int i = 0; i < n; ++i) {
            const auto& ax = compact[static_cast<std::size_t>(i)];
            double frac = idx[static_cast<std::size_t>(i)] * 0.5;
            a[i] = ax[0] + frac * (ax[1] - ax[0]);
        }
        grid.push_back(a);
        int d = 0;
        while (d < n && ++idx[static_cast<std::size_t>(d)] == 3) {
            idx[static_cast<std::size_t>(d)] = 0;
            ++d;
        }
        if (d == n) break;
    }
    return grid;
}

ExponentProfile profile(const FamilyModel& model, const std::vector<Eigen::VectorXd>& alpha_grid,
                        FitWindow window, const ProfileOptions& opt) {
    if (alpha_grid.empty()) throw ValidationError("profile: alpha grid must be nonempty");
    for (const auto& a : alpha_grid)
        if (!model.family().compact.contains(a))
            throw ValidationError("profile: alpha grid point outside the compact");

    const int n = model.n();
    ExponentProfile prof;
    prof.k = model.system().k;

    auto fit = [&](const std::function<double(double)>& sampler) {
        return estimate_exponent(sampler, window, opt.points, opt.mode, opt.half_width_floor);
    };

    // mu from sup_alpha |Y|
    ExponentFit fy = fit([&](double t) {
        double m = 0;
        for (const auto& a : alpha_grid) m = std::max(m, model.residual(t, a).norm());
        return m;
    });
    prof.mu = from_fit(fy, -1.0);

    // s from sup_alpha max-entry |d_alpha Y|, minus mu
    ExponentFit fdy = fit([&](double t) {
        double m = 0;
        for (const auto& a : alpha_grid)
            m = std::max(m, model.d_alpha_residual(t, a).cwiseAbs().maxCoeff());
        return m;
    });
    if (fdy.degenerate || prof.mu.degenerate) {
        prof.s.degenerate = true;
        prof.s.value = -std::numeric_limits<double>::infinity();
        prof.s.half_width = opt.half_width_floor;
    } else {
        prof.s.value = fdy.slope + prof.mu.value;
        prof.s.half_width = fdy.half_width + prof.mu.half_width;
    }

    // q and r entrywise (max over entries; zero entries excluded)
    auto matrix_exponent = [&](const std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)>&
                                   entryfn) {
        FittedExponent best;
        best.degenerate = true;
        best.value = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                ExponentFit fe = fit([&](double t) {
                    double m = 0;
                    for (const auto& a : alpha_grid) {
                        // Isolated parameter-degenerate alpha (e.g. J singular
                        // at the center) must not abort the grid sup.
                        try {
                            m = std::max(m, std::fabs(entryfn(t, a)(i, j)));
                        } catch (const SingularJacobian&) {
                        }
                    }
                    return m;
                });
                if (fe.degenerate) continue;
                if (best.degenerate || fe.slope > best.value) {
                    best.degenerate = false;
                    best.value = fe.slope;
                    best.half_width = fe.half_width;
                }
            }
        }
        return best;
    };

    prof.q = matrix_exponent(
        [&](double t, const Eigen::VectorXd& a) { return model.jacobian(t, a); });

    DetFloor floor{opt.det_floor_coeff, 0.0};
    // p from |det J| (alpha-sup)
    ExponentFit fdet = fit([&](double t) {
        double m = 0;
        for (const auto& a : alpha_grid)
            m = std::max(m, std::fabs(model.jacobian(t, a).determinant()));
        return m;
    });
    prof.p = from_fit(fdet);

    // Floor for the inverse tracks the fitted determinant exponent: an
    // absolute floor would misfire whenever p < 0.
    if (prof.p.degenerate) {
        // det J numerically zero everywhere: no inverse exists. The residual
        // check still works (exact families land here); anything needing
        // J^{-1} later throws SingularJacobian itself.
        prof.r.degenerate = true;
        prof.r.value = std::numeric_limits<double>::infinity();
        prof.r.half_width = opt.half_width_floor;
    } else {
        floor.p = prof.p.value;
        prof.r = matrix_exponent([&](double t, const Eigen::VectorXd& a) {
            return jacobian_inverse(model.jacobian(t, a), floor.at(t));
        });
    }

    // Leading coefficient of det J * t^{-p} over the top decade.
    if (!prof.p.degenerate) {
        auto ts = geometric_grid(window.t_hi / 10.0, window.t_hi, 99);
        double sum = 0;
        for (double t : ts)
            for (const auto& a : alpha_grid)
                sum += model.jacobian(t, a).determinant() * std::pow(t, -prof.p.value);
        prof.a = sum / (static_cast<double>(ts.size()) * static_cast<double>(alpha_grid.size()));
    }

    return prof;
}

ConditionReport check_conditions(const ExponentProfile& prof) {
    ConditionReport rep;
    const double inf = std::numeric_limits<double>::infinity();
    if (prof.mu.degenerate) {
        // Residual is identically zero: the family is an exact solution and
        // the decay hypotheses are vacuous.
        rep.exact_family = true;
        rep.cond1 = rep.cond2 = rep.verdict = true;
        rep.margin1 = rep.margin2 = inf;
        rep.nu = inf;
        return rep;
    }
    double mu_lo = prof.mu.value - prof.mu.half_width;
    double r_hi = prof.r.value + prof.r.half_width;
    double s_hi = prof.s.value + prof.s.half_width;
    double q_hi = prof.q.value + prof.q.half_width;
    rep.margin1 = mu_lo - r_hi - s_hi - 1.0;
    rep.margin2 = mu_lo - 2.0 * (r_hi + q_hi + 1.0) - prof.k;
    rep.cond1 = rep.margin1 > 0.0;
    rep.cond2 = rep.margin2 > 0.0;
    rep.nu = prof.nu();
    rep.verdict = rep.cond1 && rep.cond2;
    return rep;
}

RelationReport check_relations(const ExponentProfile& prof, int n) {
    RelationReport rep;
    // A degenerate exponent (identically-zero quantity) makes the relation
    // vacuous rather than violated.
    bool deg = prof.p.degenerate || prof.q.degenerate || prof.r.degenerate;
    rep.lhs1 = prof.p.value;
    rep.rhs1 = prof.q.value * n;
    rep.tol1 = prof.p.half_width + n * prof.q.half_width;
    rep.rel1 = deg || rep.lhs1 <= rep.rhs1 + rep.tol1;
    rep.lhs2 = prof.r.value;
    rep.rhs2 = prof.q.value * (n - 1) - prof.p.value;
    rep.tol2 = prof.r.half_width + (n - 1) * prof.q.half_width + prof.p.half_width;
    rep.rel2 = deg || rep.lhs2 <= rep.rhs2 + rep.tol2;
    return rep;
}

} // namespace asolv
