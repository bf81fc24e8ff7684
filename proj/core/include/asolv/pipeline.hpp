#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "asolv/problem.hpp"

namespace asolv {

/// Command-line level knobs; anything set here wins over the problem
/// file's overrides.
struct RunOptions {
    std::uint64_t seed = 0;
    std::optional<double> tmax_factor;
    std::optional<int> points_per_decade;
};

/// Outcome of one pipeline command. Errors are thrown (exit code 1 at the
/// CLI); exit_code here is 0 (pass) or 2 (conditions / verdict fail).
/// `machine` is a single JSON document and is byte-identical across runs
/// with the same inputs.
struct RunResult {
    int exit_code = 0;
    std::string machine;
    std::string human;
    std::string csv; // populated by solve only
};

/// Exponent profile + theorem conditions only.
RunResult run_check(const std::string& path, const RunOptions& opt = {});

/// Gate on check, then construct the solution at one parameter value and
/// emit the solution CSV (t, X_i, R_i, |Y|, |R|, t^nu |R|).
RunResult run_solve(const std::string& path, const Eigen::VectorXd& alpha,
                    const RunOptions& opt = {});

/// Gate on check, solve at alpha (compact center when absent) and compare
/// against a backward reference integration.
RunResult run_verify(const std::string& path, const std::optional<Eigen::VectorXd>& alpha = {},
                     const RunOptions& opt = {});

/// Full pipeline on the default parameter sample grid; uniformity verdict.
RunResult run_sweep(const std::string& path, const RunOptions& opt = {});

} // namespace asolv
