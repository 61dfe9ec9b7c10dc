#pragma once

// Limited-memory BFGS with projection onto a box.
//
// Each iteration fixes the variables sitting on a bound with the gradient
// pointing outward, builds the two-loop L-BFGS direction on the remaining
// ones and runs a projected backtracking Armijo search along
// P(x + alpha * d). If that search fails, the memory is dropped and the
// projected steepest-descent path is tried instead. Every iterate is
// feasible and accepted steps never increase the objective.

#include <Eigen/Core>

#include <functional>
#include <limits>

namespace mlwave::optim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct BoxBounds {
    Eigen::VectorXd lower;  // -kInf for no bound
    Eigen::VectorXd upper;  // +kInf for no bound

    static BoxBounds unbounded(Eigen::Index n);
    static BoxBounds uniform(Eigen::Index n, double lo, double hi);
    Eigen::Index size() const { return lower.size(); }
    // Throws InvalidArgument unless lower <= upper componentwise.
    void validate() const;
    Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
    bool contains(const Eigen::VectorXd& x) const;
};

struct ObjectiveEvaluation {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

using Objective = std::function<ObjectiveEvaluation(const Eigen::VectorXd&)>;

struct MinimizeOptions {
    int max_iters = 100;
    double grad_tol = 1e-6;  // on the infinity norm of the projected gradient
    int memory = 8;
    double armijo = 1e-4;
    int max_backtracks = 40;
};

enum class MinimizeStatus { Converged, MaxIterations, LineSearchFailure };

const char* to_string(MinimizeStatus status);

struct MinimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    MinimizeStatus status = MinimizeStatus::Converged;
    int iterations = 0;
    int evaluations = 0;
    double projected_gradient = 0.0;
};

// x0 is clamped into the box. Throws NonFiniteObjective if f returns a
// non-finite value or gradient at a feasible point.
MinimizeResult minimize(const Objective& f, const Eigen::VectorXd& x0, const BoxBounds& bounds,
                        const MinimizeOptions& options = {});

// Infinity norm of P(x - g) - x.
double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const BoxBounds& bounds);

struct GradientCheck {
    Eigen::VectorXd analytic;
    Eigen::VectorXd numeric;
    // max_i |analytic_i - numeric_i| / max(|analytic|_inf, |numeric|_inf)
    double relative_error = 0.0;
};

// Central differences with step 1e-6 * (1 + |x_i|).
GradientCheck check_gradient(const Objective& f, const Eigen::VectorXd& x);

}  // namespace mlwave::optim
