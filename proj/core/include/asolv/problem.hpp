#pragma once

#include <optional>
#include <string>
#include <vector>

#include "asolv/exponents.hpp"
#include "asolv/family.hpp"

namespace asolv {

/// Optional knobs a problem file may pin; anything absent falls back to
/// the library defaults (or CLI flags, which take precedence).
struct ProblemOverrides {
    std::optional<FitWindow> fit_window;
    std::optional<int> fit_points;
    std::optional<int> points_per_decade;
    std::optional<double> tmax_factor;
    std::optional<double> rtol;
    std::optional<double> atol;
    std::optional<double> picard_tol;
    std::optional<int> max_iters;
    std::optional<bool> envelope; // force envelope fitting on/off
};

/// Parsed problem file. Expressions are kept as source strings; system()
/// and family() parse them under the declared dimension.
struct ProblemFile {
    std::string name;
    int n = 0;
    double k = 0.0;
    double t0 = 1.0;
    std::vector<std::string> f_src; // n entries, in t and x1..xn
    std::vector<std::string> X_src; // n entries, in t and a1..an
    Box A0;
    Box compact;
    std::optional<double> phase_scale;
    ProblemOverrides overrides;

    /// Read and validate; throws ValidationError / SyntaxError with the
    /// offending field named.
    static ProblemFile load(const std::string& path);

    SystemDef system() const;
    AsymptoticFamily family() const;
};

} // namespace asolv
