#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "speedscale/grid.hpp"

namespace speedscale {

/**
 * Stationary deterministic policy x -> u.  Policies are cheap to copy; the
 * underlying callable is shared.
 */
class Policy {
public:
    Policy() = default;

    explicit Policy(std::function<double(double)> f, std::string name = "")
        : f_(std::make_shared<std::function<double(double)>>(std::move(f))),
          name_(std::move(name)) {}

    /**
     * Policy backed by a table on a grid.  Beyond x_max the boundary action is
     * reused, capped at x to stay feasible.
     */
    static Policy from_table(TabularFunction u, std::string name = "") {
        auto table = std::make_shared<TabularFunction>(std::move(u));
        const double x_max = table->grid().x_max();
        const double u_top = (*table)[table->grid().size() - 1];
        return Policy(
            [table, x_max, u_top](double x) {
                if (x > x_max) return std::min(x, u_top);
                return table->at(x);
            },
            std::move(name));
    }

    double operator()(double x) const {
        if (!f_) throw std::logic_error("Policy: empty");
        return (*f_)(x);
    }

    explicit operator bool() const { return static_cast<bool>(f_); }
    const std::string& name() const { return name_; }

private:
    std::shared_ptr<const std::function<double(double)>> f_;
    std::string name_;
};

}  // namespace speedscale
