#include <benchmark/benchmark.h>

#include <string>

#include "asolv/contraction.hpp"
#include "asolv/exponents.hpp"
#include "asolv/pipeline.hpp"
#include "asolv/problem.hpp"
#include "asolv/verify.hpp"

using namespace asolv;

namespace {

std::string fixture(const char* name) { return std::string(FIXTURES_DIR "/") + name; }

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

const ProblemFile& riccati() {
    static ProblemFile pf = ProblemFile::load(fixture("riccati.json"));
    return pf;
}

const FamilyModel& riccati_model() {
    static FamilyModel model(riccati().system(), riccati().family());
    return model;
}

} // namespace

static void BM_parse_eval(benchmark::State& state) {
    Expr e = parse("1/t + a1/t^2", 1);
    Eigen::VectorXd x(0), alpha = vec1(0.5);
    for (auto _ : state) benchmark::DoNotOptimize(eval(e, 37.0, x, alpha));
}
BENCHMARK(BM_parse_eval);

static void BM_residual(benchmark::State& state) {
    const auto& model = riccati_model();
    Eigen::VectorXd alpha = vec1(0.5);
    for (auto _ : state) benchmark::DoNotOptimize(model.residual(123.0, alpha));
}
BENCHMARK(BM_residual);

static void BM_profile(benchmark::State& state) {
    const auto& model = riccati_model();
    auto grid = default_alpha_grid(riccati().compact.axes);
    FitWindow window{10.0, 1e4};
    for (auto _ : state) benchmark::DoNotOptimize(profile(model, grid, window));
}
BENCHMARK(BM_profile);

static void BM_forcing(benchmark::State& state) {
    const auto& model = riccati_model();
    Eigen::VectorXd alpha = vec1(0.5);
    for (auto _ : state)
        benchmark::DoNotOptimize(forcing(model, alpha, 10.0, 1e4, 400, {}));
}
BENCHMARK(BM_forcing);

static void BM_picard_solve(benchmark::State& state) {
    const auto& model = riccati_model();
    Eigen::VectorXd alpha = vec1(0.5);
    ExponentProfile prof;
    prof.k = 0.0;
    prof.mu = {4.0, 0.0, false};
    prof.s = {0.0, 0.0, false};
    prof.q = {-2.0, 0.0, false};
    prof.r = {2.0, 0.0, false};
    prof.p = {-2.0, 0.0, false};
    prof.a = 1.0;
    SolverOptions opt;
    opt.tmax_factor = 1e3;
    ContractionSetup setup = select_T(prof, 1.5, 1.5, 0.5, 1.0, opt);
    for (auto _ : state) benchmark::DoNotOptimize(picard_solve(setup, model, alpha, opt));
}
BENCHMARK(BM_picard_solve);

static void BM_integrate_reference(benchmark::State& state) {
    const auto& sys = riccati_model().system();
    IntegrateOptions opt;
    opt.store_trajectory = false;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            integrate_reference(sys, 1e4, vec1(1.0 / (1e4 - 0.5)), 100.0, opt));
}
BENCHMARK(BM_integrate_reference);

static void BM_run_check(benchmark::State& state) {
    std::string path = fixture("riccati.json");
    for (auto _ : state) benchmark::DoNotOptimize(run_check(path));
}
BENCHMARK(BM_run_check);

static void BM_run_solve(benchmark::State& state) {
    std::string path = fixture("riccati.json");
    for (auto _ : state) benchmark::DoNotOptimize(run_solve(path, vec1(0.5)));
}
BENCHMARK(BM_run_solve);

BENCHMARK_MAIN();
