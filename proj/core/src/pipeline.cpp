#include "asolv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "asolv/contraction.hpp"
#include "asolv/verify.hpp"

namespace asolv {

namespace {

using ojson = nlohmann::ordered_json;

ojson jnum(double x) { return std::isfinite(x) ? ojson(x) : ojson(nullptr); }

/// Shortest round-trip rendering; the human report reuses it so every
/// number printed there matches the machine report byte for byte.
std::string fmt(double x) { return jnum(x).dump(); }

ojson jfit(const FittedExponent& f) {
    return {{"value", jnum(f.value)}, {"half_width", jnum(f.half_width)},
            {"degenerate", f.degenerate}};
}

struct Ctx {
    ProblemFile pf;
    std::unique_ptr<FamilyModel> model;
    FitWindow window;
    ProfileOptions popt;
    SolverOptions sopt;
    IntegrateOptions iopt;
    ExponentProfile prof;
    ConditionReport cond;
    RelationReport rel;
};

Ctx make_ctx(const std::string& path, const RunOptions& opt) {
    Ctx c{ProblemFile::load(path)};
    c.model = std::make_unique<FamilyModel>(c.pf.system(), c.pf.family());
    const auto& ov = c.pf.overrides;

    c.window = ov.fit_window.value_or(FitWindow{10.0 * c.pf.t0, 1e4 * c.pf.t0});
    c.popt.points = ov.fit_points.value_or(360);
    if (ov.envelope) c.popt.mode = *ov.envelope ? FitMode::Envelope : FitMode::Raw;

    c.prof = profile(*c.model, default_alpha_grid(c.pf.compact.axes), c.window, c.popt);
    c.cond = check_conditions(c.prof);
    c.rel = check_relations(c.prof, c.pf.n);

    c.sopt.tmax_factor = opt.tmax_factor.value_or(ov.tmax_factor.value_or(1e4));
    c.sopt.points_per_decade = opt.points_per_decade.value_or(ov.points_per_decade.value_or(200));
    c.sopt.phase_scale = c.pf.phase_scale;
    c.sopt.picard_tol = ov.picard_tol.value_or(1e-10);
    c.sopt.max_iters = ov.max_iters.value_or(50);
    c.sopt.seed = opt.seed;
    c.sopt.fit_mode = c.popt.mode;
    c.sopt.det_floor =
        DetFloor{c.popt.det_floor_coeff, c.prof.p.degenerate ? 0.0 : c.prof.p.value};

    c.iopt.rtol = ov.rtol.value_or(1e-10);
    c.iopt.atol = ov.atol.value_or(1e-12);
    c.iopt.store_trajectory = false;
    return c;
}

ojson profile_json(const Ctx& c) {
    ojson j;
    j["k"] = jnum(c.prof.k);
    j["mu"] = jfit(c.prof.mu);
    j["s"] = jfit(c.prof.s);
    j["q"] = jfit(c.prof.q);
    j["r"] = jfit(c.prof.r);
    j["p"] = jfit(c.prof.p);
    j["det_coeff"] = jnum(c.prof.a);
    j["lambda"] = jnum(c.prof.lambda());
    j["nu"] = jnum(c.prof.nu());
    j["fit_window"] = {jnum(c.window.t_lo), jnum(c.window.t_hi)};
    return j;
}

ojson conditions_json(const ConditionReport& r) {
    return {{"cond1", r.cond1},       {"cond2", r.cond2},
            {"margin1", jnum(r.margin1)}, {"margin2", jnum(r.margin2)},
            {"nu", jnum(r.nu)},       {"exact_family", r.exact_family},
            {"verdict", r.verdict}};
}

ojson relations_json(const RelationReport& r) {
    return {{"rel1", r.rel1},       {"lhs1", jnum(r.lhs1)}, {"rhs1", jnum(r.rhs1)},
            {"tol1", jnum(r.tol1)}, {"rel2", r.rel2},       {"lhs2", jnum(r.lhs2)},
            {"rhs2", jnum(r.rhs2)}, {"tol2", jnum(r.tol2)}};
}

void human_profile(std::ostringstream& os, const Ctx& c) {
    auto line = [&](const char* name, const FittedExponent& f) {
        os << "  " << name << " = " << fmt(f.value) << " +/- " << fmt(f.half_width)
           << (f.degenerate ? " (degenerate)" : "") << "\n";
    };
    os << "profile (fit window [" << fmt(c.window.t_lo) << ", " << fmt(c.window.t_hi) << "]):\n";
    line("mu", c.prof.mu);
    line("s ", c.prof.s);
    line("q ", c.prof.q);
    line("r ", c.prof.r);
    line("p ", c.prof.p);
    os << "  det J ~ " << fmt(c.prof.a) << " * t^p\n";
    os << "  lambda = " << fmt(c.prof.lambda()) << ", nu = " << fmt(c.prof.nu()) << "\n";
    os << "conditions:\n";
    os << "  mu > r + s + 1        margin " << fmt(c.cond.margin1) << " -> "
       << (c.cond.cond1 ? "ok" : "violated") << "\n";
    os << "  mu > 2(r + q + 1) + k margin " << fmt(c.cond.margin2) << " -> "
       << (c.cond.cond2 ? "ok" : "violated") << "\n";
    if (c.cond.exact_family) os << "  (residual identically zero; conditions vacuous)\n";
    os << "relations:\n";
    os << "  p <= q n:         " << fmt(c.rel.lhs1) << " <= " << fmt(c.rel.rhs1) << " + "
       << fmt(c.rel.tol1) << " -> " << (c.rel.rel1 ? "ok" : "violated") << "\n";
    os << "  r <= q(n-1) - p:  " << fmt(c.rel.lhs2) << " <= " << fmt(c.rel.rhs2) << " + "
       << fmt(c.rel.tol2) << " -> " << (c.rel.rel2 ? "ok" : "violated") << "\n";
}

RunResult finish(const Ctx& c, const char* command, ojson j, std::ostringstream& os,
                 bool pass) {
    j["verdict"] = pass ? "pass" : "fail";
    os << "verdict: " << (pass ? "pass" : "fail") << "\n";
    RunResult res;
    res.exit_code = pass ? 0 : 2;
    res.machine = j.dump(2) + "\n";
    res.human = os.str();
    (void)command;
    return res;
}

ojson report_head(const Ctx& c, const char* command, std::ostringstream& os) {
    ojson j;
    j["problem"] = c.pf.name;
    j["command"] = command;
    j["n"] = c.pf.n;
    j["profile"] = profile_json(c);
    j["conditions"] = conditions_json(c.cond);
    j["relations"] = relations_json(c.rel);
    os << "problem: " << c.pf.name << " (n=" << c.pf.n << ", k=" << fmt(c.pf.k) << ")\n";
    os << "command: " << command << "\n";
    human_profile(os, c);
    return j;
}

// ---------------------------------------------------------------------------
// per-alpha solve
// ---------------------------------------------------------------------------

struct AlphaRun {
    Eigen::VectorXd alpha;
    bool exact = false;
    ContractionSetup setup;
    RemainderSolution sol;
    AssembledSolution as;
    double ratio = 0.0; // worst consecutive increment ratio
};

/// K must dominate the forcing norm (iterates start at Z and stay within
/// ~2||Z|| under contraction) but also enters L_K, so T and K are settled
/// together: guess, select T, measure ||Z|| on a coarse grid, repeat.
ContractionSetup settle_setup(const Ctx& c, const Eigen::VectorXd& alpha, double M_K, double M1) {
    QuadratureSpec coarse_quad = c.sopt.quad;
    coarse_quad.rel_tol = 1e-4;
    if (!coarse_quad.phase_scale) coarse_quad.phase_scale = c.sopt.phase_scale;

    double K = 1.0;
    for (int round = 0; round < 6; ++round) {
        ContractionSetup setup = select_T(c.prof, M_K, M1, K, c.pf.t0, c.sopt);
        int cells =
            std::max(32, static_cast<int>(std::ceil(20.0 * std::log10(setup.T_max / setup.T))));
        ForcingResult fr = forcing(*c.model, alpha, setup.T, setup.T_max, cells, coarse_quad,
                                   c.sopt.fit_mode, c.sopt.det_floor);
        double need = std::max(2.0 * weighted_norm(fr.Z, setup.lambda), 1e-9);
        if (need <= K && K <= 4.0 * need) return setup;
        K = need;
    }
    return select_T(c.prof, M_K, M1, K, c.pf.t0, c.sopt);
}

AlphaRun solve_alpha(const Ctx& c, const Eigen::VectorXd& alpha) {
    if (alpha.size() != c.pf.n)
        throw ValidationError("alpha has " + std::to_string(alpha.size()) +
                              " components, expected " + std::to_string(c.pf.n));
    if (!c.pf.A0.contains(alpha)) throw ValidationError("alpha lies outside A0");

    AlphaRun run;
    run.alpha = alpha;
    if (c.cond.exact_family) {
        // Residual identically zero: X itself solves the equation, R == 0.
        run.exact = true;
        double T = c.pf.t0;
        double T_max = T * c.sopt.tmax_factor;
        int cells = std::max(
            32, static_cast<int>(std::ceil(std::log10(T_max / T) * c.sopt.points_per_decade)));
        auto ts = geometric_grid(T, T_max, cells);
        std::vector<Eigen::VectorXd> zero(ts.size(), Eigen::VectorXd::Zero(c.pf.n));
        run.sol.C = GridFunction(ts, zero);
        run.sol.R = GridFunction(ts, std::move(zero));
        run.as = assemble(*c.model, alpha, run.sol, c.sopt.fit_mode);
        return run;
    }

    double M_K = estimate_MK(*c.model, alpha, c.sopt.mk_radius, c.sopt.mk_samples, c.sopt.seed);
    double M1 = estimate_M1(*c.model, alpha, c.prof, c.window, c.sopt.det_floor);
    run.setup = settle_setup(c, alpha, M_K, M1);
    run.sol = picard_solve(run.setup, *c.model, alpha, c.sopt);
    run.as = assemble(*c.model, alpha, run.sol, c.sopt.fit_mode);
    const auto& inc = run.sol.increment_norms;
    for (std::size_t i = 1; i < inc.size(); ++i)
        if (inc[i - 1] > 0.0) run.ratio = std::max(run.ratio, inc[i] / inc[i - 1]);
    return run;
}

ojson setup_json(const ContractionSetup& s) {
    return {{"T", jnum(s.T)},     {"T_max", jnum(s.T_max)}, {"lambda", jnum(s.lambda)},
            {"K", jnum(s.K)},     {"M_K", jnum(s.M_K)},     {"M1", jnum(s.M1)},
            {"L_K", jnum(s.L_K)}, {"L0", jnum(s.L0)},       {"cells", s.cells}};
}

ojson alpha_json(const AlphaRun& run) {
    ojson j;
    j["alpha"] = ojson::array();
    for (int i = 0; i < run.alpha.size(); ++i) j["alpha"].push_back(jnum(run.alpha[i]));
    j["exact"] = run.exact;
    if (!run.exact) {
        j["contraction"] = setup_json(run.setup);
        j["iterations"] = run.sol.iterations;
        j["final_delta"] = jnum(run.sol.final_delta);
        j["increment_ratio"] = jnum(run.ratio);
        j["norm_C"] = jnum(run.sol.norm_C);
        j["tail_bound"] = jnum(run.sol.tail_bound);
    }
    j["decay_slope"] = jnum(run.as.decay_slope);
    j["decay_c"] = jnum(run.as.decay_c);
    j["degenerate"] = run.as.degenerate;
    return j;
}

void human_alpha(std::ostringstream& os, const AlphaRun& run) {
    os << "  alpha = [";
    for (int i = 0; i < run.alpha.size(); ++i) os << (i ? ", " : "") << fmt(run.alpha[i]);
    os << "]: ";
    if (run.exact) {
        os << "exact family, R == 0\n";
        return;
    }
    os << "T=" << fmt(run.setup.T) << " K=" << fmt(run.setup.K) << " L_K=" << fmt(run.setup.L_K)
       << " L0=" << fmt(run.setup.L0) << " iters=" << run.sol.iterations
       << " ratio=" << fmt(run.ratio) << " |R| ~ " << fmt(run.as.decay_c) << " * t^"
       << fmt(run.as.decay_slope) << (run.as.degenerate ? " (degenerate)" : "") << "\n";
}

std::string solution_csv(const Ctx& c, const AlphaRun& run) {
    const int n = c.pf.n;
    double nu = c.cond.exact_family ? 0.0 : c.prof.nu();
    std::ostringstream os;
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",X_" << i;
    for (int i = 1; i <= n; ++i) os << ",R_" << i;
    os << ",abs_Y,abs_R,tnu_abs_R\n";
    const auto& ts = run.sol.R.times();
    for (std::size_t row = 0; row < ts.size(); ++row) {
        double t = ts[row];
        Eigen::VectorXd X = c.model->X_value(t, run.alpha);
        const Eigen::VectorXd& R = run.sol.R.values()[row];
        double ynorm = c.model->residual(t, run.alpha).norm();
        double rnorm = R.norm();
        os << fmt(t);
        for (int i = 0; i < n; ++i) os << "," << fmt(X[i]);
        for (int i = 0; i < n; ++i) os << "," << fmt(R[i]);
        os << "," << fmt(ynorm) << "," << fmt(rnorm) << "," << fmt(std::pow(t, nu) * rnorm)
           << "\n";
    }
    return os.str();
}

RunResult refuse(const Ctx& c, const char* command) {
    std::ostringstream os;
    ojson j = report_head(c, command, os);
    j["refused"] = "theorem conditions fail; nothing to solve";
    os << "refused: theorem conditions fail; nothing to solve\n";
    return finish(c, command, std::move(j), os, false);
}

} // namespace

RunResult run_check(const std::string& path, const RunOptions& opt) {
    Ctx c = make_ctx(path, opt);
    std::ostringstream os;
    ojson j = report_head(c, "check", os);
    return finish(c, "check", std::move(j), os, c.cond.verdict);
}

RunResult run_solve(const std::string& path, const Eigen::VectorXd& alpha,
                    const RunOptions& opt) {
    Ctx c = make_ctx(path, opt);
    if (!c.cond.verdict) return refuse(c, "solve");
    std::ostringstream os;
    ojson j = report_head(c, "solve", os);
    AlphaRun run = solve_alpha(c, alpha);
    j["alphas"] = ojson::array({alpha_json(run)});
    os << "solve:\n";
    human_alpha(os, run);
    RunResult res = finish(c, "solve", std::move(j), os, true);
    res.csv = solution_csv(c, run);
    return res;
}

RunResult run_verify(const std::string& path, const std::optional<Eigen::VectorXd>& alpha,
                     const RunOptions& opt) {
    Ctx c = make_ctx(path, opt);
    if (!c.cond.verdict) return refuse(c, "verify");
    std::ostringstream os;
    ojson j = report_head(c, "verify", os);
    Eigen::VectorXd a = alpha ? *alpha : c.pf.compact.center();
    AlphaRun run = solve_alpha(c, a);
    ojson ja = alpha_json(run);

    bool pass;
    if (run.as.degenerate) {
        ja["verify_slope"] = nullptr;
        ja["verify_c"] = jnum(0.0);
        ja["verify_degenerate"] = true;
        os << "verify:\n";
        human_alpha(os, run);
        os << "  remainder below integrator noise everywhere\n";
        pass = true;
    } else {
        double nu = c.prof.nu();
        DecayFit df = compare_decay(*c.model, a, run.as.x, nu, c.iopt, c.sopt.fit_mode);
        ja["verify_slope"] = jnum(df.slope);
        ja["verify_c"] = jnum(df.c);
        ja["verify_degenerate"] = df.degenerate;
        os << "verify:\n";
        human_alpha(os, run);
        os << "  |x_ref - X| ~ " << fmt(df.c) << " * t^-nu, slope " << fmt(df.slope) << "\n";
        pass = df.degenerate || df.slope <= -nu + 0.15;
    }
    j["alphas"] = ojson::array({std::move(ja)});
    return finish(c, "verify", std::move(j), os, pass);
}

RunResult run_sweep(const std::string& path, const RunOptions& opt) {
    Ctx c = make_ctx(path, opt);
    if (!c.cond.verdict) return refuse(c, "sweep");
    std::ostringstream os;
    ojson j = report_head(c, "sweep", os);

    auto samples = default_sweep_samples(c.pf.compact);
    const double nu = c.prof.nu();
    j["alphas"] = ojson::array();
    os << "sweep (" << samples.size() << " samples):\n";

    bool any_failed = false, slopes_ok = true;
    std::vector<double> cs;
    std::optional<ojson> center_setup;
    Eigen::VectorXd center = c.pf.compact.center();
    double best_center_dist = std::numeric_limits<double>::infinity();

    for (const auto& a : samples) {
        ojson ja;
        try {
            AlphaRun run = solve_alpha(c, a);
            ja = alpha_json(run);
            if (run.as.degenerate) {
                ja["verify_degenerate"] = true;
                os << "  alpha near [";
                for (int i = 0; i < a.size(); ++i) os << (i ? ", " : "") << fmt(a[i]);
                os << "]: remainder below integrator noise\n";
            } else {
                DecayFit df = compare_decay(*c.model, a, run.as.x, nu, c.iopt, c.sopt.fit_mode);
                ja["verify_slope"] = jnum(df.slope);
                ja["verify_c"] = jnum(df.c);
                ja["verify_degenerate"] = df.degenerate;
                if (!df.degenerate) {
                    cs.push_back(df.c);
                    if (!(df.slope <= -nu + 0.15)) slopes_ok = false;
                }
                human_alpha(os, run);
                os << "    reference: slope " << fmt(df.slope) << ", c " << fmt(df.c) << "\n";
                double d = (a - center).norm();
                if (!run.exact && d < best_center_dist) {
                    best_center_dist = d;
                    center_setup = setup_json(run.setup);
                }
            }
        } catch (const Error& e) {
            any_failed = true;
            ja["alpha"] = ojson::array();
            for (int i = 0; i < a.size(); ++i) ja["alpha"].push_back(jnum(a[i]));
            ja["failed"] = true;
            ja["error"] = e.what();
            os << "  alpha sample failed: " << e.what() << "\n";
        }
        j["alphas"].push_back(std::move(ja));
    }

    ojson ju;
    double max_c = 0.0, median_c = 0.0, ratio = 0.0;
    if (!cs.empty()) {
        max_c = *std::max_element(cs.begin(), cs.end());
        std::nth_element(cs.begin(), cs.begin() + static_cast<std::ptrdiff_t>(cs.size() / 2),
                         cs.end());
        median_c = cs[cs.size() / 2];
        ratio = median_c > 0.0 ? max_c / median_c : std::numeric_limits<double>::infinity();
    }
    bool constants_ok = cs.empty() || ratio <= 10.0;
    bool pass = !any_failed && slopes_ok && constants_ok;
    ju["max_c"] = jnum(max_c);
    ju["median_c"] = jnum(median_c);
    ju["constant_ratio"] = jnum(ratio);
    ju["verdict"] = pass;
    if (center_setup) j["contraction"] = *center_setup;
    j["uniformity"] = std::move(ju);
    os << "uniformity: max_c=" << fmt(max_c) << " median_c=" << fmt(median_c)
       << " ratio=" << fmt(ratio) << " -> " << (pass ? "pass" : "fail") << "\n";
    return finish(c, "sweep", std::move(j), os, pass);
}

} // namespace asolv
