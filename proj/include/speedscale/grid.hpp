#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace speedscale {

/// Truncated lattice state space {0, delta, ..., x_max}.
class StateGrid {
public:
    StateGrid(double delta, double x_max) : delta_(delta) {
        if (!(delta > 0.0)) throw std::invalid_argument("StateGrid: delta must be positive");
        const double ratio = x_max / delta;
        n_ = static_cast<std::size_t>(std::llround(ratio)) + 1;
        if (n_ < 1 || std::abs(ratio - std::llround(ratio)) > 1e-9 * std::max(1.0, ratio))
            throw std::invalid_argument("StateGrid: x_max must be a lattice point");
        x_max_ = static_cast<double>(n_ - 1) * delta_;
    }

    double delta() const { return delta_; }
    double x_max() const { return x_max_; }
    std::size_t size() const { return n_; }
    double value(std::size_t i) const { return static_cast<double>(i) * delta_; }

    bool on_lattice(double x) const {
        const double r = x / delta_;
        const long long i = std::llround(r);
        return i >= 0 && static_cast<std::size_t>(i) < n_ &&
               std::abs(x - static_cast<double>(i) * delta_) <= 1e-9 * std::max(1.0, std::abs(x));
    }

    /// Index of an exact lattice point; off-grid values are rejected.
    std::size_t index(double x) const {
        const long long i = std::llround(x / delta_);
        if (i < 0 || static_cast<std::size_t>(i) >= n_ ||
            std::abs(x - static_cast<double>(i) * delta_) > 1e-9 * std::max(1.0, std::abs(x)))
            throw std::domain_error("StateGrid: value is not a grid point");
        return static_cast<std::size_t>(i);
    }

    std::size_t clamp_index(long long i) const {
        if (i < 0) return 0;
        if (static_cast<std::size_t>(i) >= n_) return n_ - 1;
        return static_cast<std::size_t>(i);
    }

private:
    double delta_;
    double x_max_ = 0.0;
    std::size_t n_ = 0;
};

/**
 * Real-valued function tabulated on a StateGrid.  Evaluation is exact-match
 * only; there is no interpolation.  clamped_at() extends the function to the
 * lattice beyond x_max by its boundary value, matching the reflecting
 * truncation used by the solver.
 */
class TabularFunction {
public:
    TabularFunction(StateGrid grid, std::vector<double> values)
        : grid_(grid), v_(std::move(values)) {
        if (v_.size() != grid_.size())
            throw std::invalid_argument("TabularFunction: size mismatch with grid");
    }

    static TabularFunction zeros(const StateGrid& grid) {
        return TabularFunction(grid, std::vector<double>(grid.size(), 0.0));
    }

    static TabularFunction tabulate(const StateGrid& grid, const std::function<double(double)>& f) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.value(i));
        return TabularFunction(grid, std::move(v));
    }

    const StateGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }
    double operator[](std::size_t i) const { return v_[i]; }
    double& operator[](std::size_t i) { return v_[i]; }

    /// Exact lattice evaluation; throws on off-grid arguments.
    double at(double x) const { return v_[grid_.index(x)]; }

    /// Lattice evaluation with the index clamped into [0, x_max].
    double clamped_at(double x) const {
        const long long i = std::llround(x / grid_.delta());
        if (std::abs(x - static_cast<double>(i) * grid_.delta()) >
            1e-9 * std::max(1.0, std::abs(x)))
            throw std::domain_error("TabularFunction: off-lattice evaluation");
        return v_[grid_.clamp_index(i)];
    }

    /// Same function shifted so that it vanishes at x = 0.
    TabularFunction normalized() const {
        std::vector<double> v = v_;
        const double v0 = v[0];
        for (double& x : v) x -= v0;
        return TabularFunction(grid_, std::move(v));
    }

private:
    StateGrid grid_;
    std::vector<double> v_;
};

}  // namespace speedscale
