#include "asolv/grid.hpp"

#include <cmath>

namespace asolv {

std::vector<double> geometric_grid(double t_lo, double t_hi, int cells) {
    if (!(t_lo > 0.0) || !(t_hi > t_lo) || cells < 1)
        throw ValidationError("geometric_grid: need 0 < t_lo < t_hi and cells >= 1");
    std::vector<double> ts(static_cast<std::size_t>(cells) + 1);
    double u0 = std::log(t_lo);
    double du = (std::log(t_hi) - u0) / cells;
    for (int i = 0; i <= cells; ++i) ts[static_cast<std::size_t>(i)] = std::exp(u0 + du * i);
    ts.front() = t_lo;
    ts.back() = t_hi;
    return ts;
}

GridFunction::GridFunction(std::vector<double> times, std::vector<Eigen::VectorXd> values)
    : times_(std::move(times)), values_(std::move(values)) {
    validate();
    log_step_ = std::log(times_[1] / times_[0]);
}

GridFunction GridFunction::zeros(double t_lo, double t_hi, int cells, int dim) {
    auto ts = geometric_grid(t_lo, t_hi, cells);
    std::vector<Eigen::VectorXd> vals(ts.size(), Eigen::VectorXd::Zero(dim));
    return GridFunction(std::move(ts), std::move(vals));
}

void GridFunction::validate() const {
    if (times_.size() < 2 || times_.size() != values_.size())
        throw ValidationError("GridFunction: need >= 2 nodes and matching value count");
    double ratio = times_[1] / times_[0];
    for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
        if (!(times_[i + 1] > times_[i]))
            throw ValidationError("GridFunction: grid not strictly increasing");
        double r = times_[i + 1] / times_[i];
        if (std::fabs(r / ratio - 1.0) > 1e-12)
            throw ValidationError("GridFunction: grid ratio not constant");
    }
    for (const auto& v : values_)
        if (v.size() != values_.front().size())
            throw ValidationError("GridFunction: inconsistent value dimension");
}

Eigen::VectorXd GridFunction::operator()(double t) const {
    const std::size_t m = times_.size() - 1;
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    double u = std::log(t / times_.front()) / log_step_;
    // Snap to the node when t is (up to rounding) a grid point, so node
    // evaluation returns the stored value exactly.
    double nearest = std::round(u);
    if (std::fabs(u - nearest) < 1e-9 && nearest >= 0 && nearest <= static_cast<double>(m))
        return values_[static_cast<std::size_t>(nearest)];
    auto i = static_cast<std::size_t>(u);
    if (i >= m) i = m - 1;
    double s = u - static_cast<double>(i);
    if (s == 0.0) return values_[i];

    // Catmull-Rom in log t on the uniform index coordinate; one-sided
    // slopes at the boundary cells.
    const Eigen::VectorXd& p1 = values_[i];
    const Eigen::VectorXd& p2 = values_[i + 1];
    Eigen::VectorXd m1 = (i > 0) ? Eigen::VectorXd(0.5 * (p2 - values_[i - 1]))
                                 : Eigen::VectorXd(p2 - p1);
    Eigen::VectorXd m2 = (i + 2 <= m) ? Eigen::VectorXd(0.5 * (values_[i + 2] - p1))
                                      : Eigen::VectorXd(p2 - p1);
    double s2 = s * s, s3 = s2 * s;
    double h00 = 2 * s3 - 3 * s2 + 1;
    double h10 = s3 - 2 * s2 + s;
    double h01 = -2 * s3 + 3 * s2;
    double h11 = s3 - s2;
    return h00 * p1 + h10 * m1 + h01 * p2 + h11 * m2;
}

Eigen::VectorXd GridFunction::at_cell_mid(std::size_t i) const {
    if (i + 1 >= times_.size()) throw ValidationError("at_cell_mid: cell index out of range");
    return (*this)(std::sqrt(times_[i] * times_[i + 1]));
}

} // namespace asolv
