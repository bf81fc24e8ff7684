#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "asolv/contraction.hpp"
#include "asolv/exponents.hpp"
#include "asolv/family.hpp"

namespace asolv {

struct IntegrateOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double fixed_step = 0.0; // > 0: fixed step size, no error control
    std::size_t max_steps = 50'000'000;
    bool store_trajectory = true;
};

/// Accepted steps of one reference integration.
struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    double rtol = 0.0, atol = 0.0;
    std::size_t steps_accepted = 0;
    std::size_t steps_rejected = 0;
    double max_err_ratio = 0.0; // max accepted (local error)/(tolerance); <= 1

    const Eigen::VectorXd& final_state() const { return states.back(); }
};

/// Adaptive Dormand-Prince 5(4) with PI step control and 4th-order dense
/// output. Supports backward integration (t_end < t_start).
Trajectory integrate_reference(const SystemDef& sys, double t_start,
                               const Eigen::VectorXd& x_start, double t_end,
                               const IntegrateOptions& opt = {});

/// Same integrator, sampling the dense output at the given times (which
/// must be ordered in the direction of integration).
Trajectory integrate_with_monitor(const SystemDef& sys, double t_start,
                                  const Eigen::VectorXd& x_start, double t_end,
                                  const IntegrateOptions& opt,
                                  const std::vector<double>& monitor_times,
                                  std::vector<Eigen::VectorXd>& monitor_states);

/// Fitted decay of |x_ref - X|: seed the reference integrator at the
/// assembled far-field state, integrate backward, regress on the top two
/// decades. A remainder below 10*atol everywhere is reported as the
/// -inf sentinel.
struct DecayFit {
    double slope = 0.0;
    double c = 0.0; // median of |x_ref - X| * t^nu over the fit window
    bool degenerate = false;
};

DecayFit compare_decay(const FamilyModel& model, const Eigen::VectorXd& alpha,
                       const GridFunction& assembled, double nu, const IntegrateOptions& opt = {},
                       FitMode mode = FitMode::Auto);

/// Full-pipeline verification per alpha sample; grid proxy for the
/// theorem's uniform constant.
struct UniformityReport {
    struct Entry {
        Eigen::VectorXd alpha;
        double slope = 0.0;
        double c = 0.0;
        bool degenerate = false;
        bool failed = false;
        std::string error;
    };
    std::vector<Entry> entries;
    double max_c = 0.0;
    double median_c = 0.0;
    double constant_ratio = 0.0;
    bool verdict = false;
};

using AssembleFn = std::function<AssembledSolution(const Eigen::VectorXd&)>;

UniformityReport sweep_uniformity(const FamilyModel& model,
                                  const std::vector<Eigen::VectorXd>& alpha_samples,
                                  const AssembleFn& builder, double nu,
                                  const IntegrateOptions& opt = {}, FitMode mode = FitMode::Auto);

/// Default sweep samples: 3 values per axis for n >= 2, 5 for n = 1
/// (corners always included).
std::vector<Eigen::VectorXd> default_sweep_samples(const Box& compact);

} // namespace asolv
