#pragma once

// Shared fixture plumbing for the test binaries: load a problem file, fit
// its exponent profile the same way the pipeline does, and solve at one
// parameter value.

#include <cmath>
#include <memory>
#include <string>

#include "asolv/contraction.hpp"
#include "asolv/exponents.hpp"
#include "asolv/problem.hpp"

namespace testutil {

inline std::string fixture(const char* name) { return std::string(FIXTURES_DIR "/") + name; }

inline bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

struct Loaded {
    asolv::ProblemFile pf;
    std::unique_ptr<asolv::FamilyModel> model;
    asolv::FitWindow window;
    asolv::ExponentProfile prof;
    asolv::ConditionReport cond;
    asolv::SolverOptions sopt;
};

inline Loaded load_fixture(const char* name) {
    using namespace asolv;
    Loaded L{ProblemFile::load(fixture(name))};
    L.model = std::make_unique<FamilyModel>(L.pf.system(), L.pf.family());
    const auto& ov = L.pf.overrides;

    L.window = ov.fit_window.value_or(FitWindow{10.0 * L.pf.t0, 1e4 * L.pf.t0});
    ProfileOptions popt;
    popt.points = ov.fit_points.value_or(360);
    if (ov.envelope) popt.mode = *ov.envelope ? FitMode::Envelope : FitMode::Raw;
    L.prof = profile(*L.model, default_alpha_grid(L.pf.compact.axes), L.window, popt);
    L.cond = check_conditions(L.prof);

    L.sopt.tmax_factor = ov.tmax_factor.value_or(1e4);
    L.sopt.points_per_decade = ov.points_per_decade.value_or(200);
    L.sopt.phase_scale = L.pf.phase_scale;
    L.sopt.picard_tol = ov.picard_tol.value_or(1e-10);
    L.sopt.max_iters = ov.max_iters.value_or(50);
    L.sopt.fit_mode = popt.mode;
    L.sopt.det_floor =
        DetFloor{popt.det_floor_coeff, L.prof.p.degenerate ? 0.0 : L.prof.p.value};
    return L;
}

// K must dominate ||Z||_lambda (iterates start at Z) but also enters L_K,
// so T and K are settled together: guess, select T, measure the forcing on
// a coarse grid, repeat until consistent.
inline asolv::ContractionSetup settle(const Loaded& L, const Eigen::VectorXd& alpha, double M_K,
                                      double M1) {
    using namespace asolv;
    QuadratureSpec coarse;
    coarse.rel_tol = 1e-4;
    coarse.phase_scale = L.sopt.phase_scale;

    double K = 1.0;
    for (int round = 0; round < 6; ++round) {
        ContractionSetup setup = select_T(L.prof, M_K, M1, K, L.pf.t0, L.sopt);
        int cells =
            std::max(32, static_cast<int>(std::ceil(20.0 * std::log10(setup.T_max / setup.T))));
        ForcingResult fr = forcing(*L.model, alpha, setup.T, setup.T_max, cells, coarse,
                                   L.sopt.fit_mode, L.sopt.det_floor);
        double need = std::max(2.0 * weighted_norm(fr.Z, setup.lambda), 1e-9);
        if (need <= K && K <= 4.0 * need) return setup;
        K = need;
    }
    return select_T(L.prof, M_K, M1, K, L.pf.t0, L.sopt);
}

struct SolveOut {
    asolv::ContractionSetup setup;
    asolv::RemainderSolution sol;
    asolv::AssembledSolution as;
};

inline SolveOut solve_at(const Loaded& L, const Eigen::VectorXd& alpha) {
    using namespace asolv;
    SolveOut out;
    double M_K = estimate_MK(*L.model, alpha, L.sopt.mk_radius, L.sopt.mk_samples, L.sopt.seed);
    double M1 = estimate_M1(*L.model, alpha, L.prof, L.window, L.sopt.det_floor);
    out.setup = settle(L, alpha, M_K, M1);
    out.sol = picard_solve(out.setup, *L.model, alpha, L.sopt);
    out.as = assemble(*L.model, alpha, out.sol, L.sopt.fit_mode);
    return out;
}

} // namespace testutil
