#pragma once

#include <vector>

#include <Eigen/Core>

#include "asolv/errors.hpp"

namespace asolv {

/// Vector-valued function sampled on a geometric time grid
/// t_i = t_front * ratio^i, with cubic interpolation in log t between
/// nodes. Carrier for C(t), Z(t), R(t) and assembled trajectories.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(std::vector<double> times, std::vector<Eigen::VectorXd> values);

    /// Geometric grid with m+1 nodes spanning [t_lo, t_hi], zero values.
    static GridFunction zeros(double t_lo, double t_hi, int cells, int dim);

    const std::vector<double>& times() const { return times_; }
    const std::vector<Eigen::VectorXd>& values() const { return values_; }
    std::vector<Eigen::VectorXd>& values() { return values_; }

    int dim() const { return values_.empty() ? 0 : static_cast<int>(values_.front().size()); }
    std::size_t size() const { return times_.size(); }
    double t_front() const { return times_.front(); }
    double t_back() const { return times_.back(); }
    double log_step() const { return log_step_; }

    /// Interpolated value; exact at nodes.
    Eigen::VectorXd operator()(double t) const;

    /// Value at the cell midpoint (geometric mean of nodes i, i+1).
    Eigen::VectorXd at_cell_mid(std::size_t i) const;

private:
    void validate() const;

    std::vector<double> times_;
    std::vector<Eigen::VectorXd> values_;
    double log_step_ = 0.0; // log(t_{i+1}/t_i), constant across the grid
};

/// Node times for a geometric grid: cells+1 points on [t_lo, t_hi].
std::vector<double> geometric_grid(double t_lo, double t_hi, int cells);

} // namespace asolv
