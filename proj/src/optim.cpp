#include "mlwave/optim.hpp"

#include "mlwave/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace mlwave::optim {

BoxBounds BoxBounds::unbounded(Eigen::Index n) {
    return {Eigen::VectorXd::Constant(n, -kInf), Eigen::VectorXd::Constant(n, kInf)};
}

BoxBounds BoxBounds::uniform(Eigen::Index n, double lo, double hi) {
    return {Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi)};
}

void BoxBounds::validate() const {
    if (lower.size() != upper.size()) throw Error(ErrorCode::ShapeMismatch, "bound vectors differ in length");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (!(lower(i) <= upper(i))) throw Error(ErrorCode::InvalidArgument, "lower bound exceeds upper bound");
    }
}

Eigen::VectorXd BoxBounds::clamp(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

bool BoxBounds::contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

const char* to_string(MinimizeStatus status) {
    switch (status) {
        case MinimizeStatus::Converged: return "converged";
        case MinimizeStatus::MaxIterations: return "max-iterations";
        case MinimizeStatus::LineSearchFailure: return "line-search-failure";
    }
    return "unknown";
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const BoxBounds& bounds) {
    return (bounds.clamp(x - g) - x).lpNorm<Eigen::Infinity>();
}

namespace {

struct Pair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
};

ObjectiveEvaluation evaluate(const Objective& f, const Eigen::VectorXd& x, int& count) {
    ObjectiveEvaluation ev = f(x);
    ++count;
    if (!std::isfinite(ev.value) || ev.gradient.size() != x.size() || !ev.gradient.allFinite()) {
        throw Error(ErrorCode::NonFiniteObjective, "objective returned a non-finite value or gradient");
    }
    return ev;
}

// Two-loop recursion for -H g restricted to the free variables.
Eigen::VectorXd lbfgs_direction(const std::deque<Pair>& memory, const Eigen::VectorXd& g,
                                const Eigen::Array<bool, Eigen::Dynamic, 1>& free) {
    const auto mask = [&](Eigen::VectorXd v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (!free(i)) v(i) = 0.0;
        }
        return v;
    };
    Eigen::VectorXd q = mask(g);
    if (memory.empty()) return -q;
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
        alpha[i] = memory[i].rho * memory[i].s.dot(q);
        q -= alpha[i] * mask(memory[i].y);
    }
    const Pair& last = memory.back();
    const double gamma = last.s.dot(last.y) / last.y.squaredNorm();
    Eigen::VectorXd r = gamma * q;
    for (std::size_t i = 0; i < memory.size(); ++i) {
        const double beta = memory[i].rho * mask(memory[i].y).dot(r);
        r += (alpha[i] - beta) * mask(memory[i].s);
    }
    return -mask(r);
}

}  // namespace

MinimizeResult minimize(const Objective& f, const Eigen::VectorXd& x0, const BoxBounds& bounds,
                        const MinimizeOptions& options) {
    bounds.validate();
    if (bounds.size() != x0.size()) throw Error(ErrorCode::ShapeMismatch, "bounds and x0 differ in dimension");

    MinimizeResult result;
    result.x = bounds.clamp(x0);
    ObjectiveEvaluation current = evaluate(f, result.x, result.evaluations);
    std::deque<Pair> memory;
    const Eigen::Index n = x0.size();
    Eigen::Array<bool, Eigen::Dynamic, 1> free(n);

    for (;;) {
        const Eigen::VectorXd& x = result.x;
        const Eigen::VectorXd& g = current.gradient;
        result.projected_gradient = projected_gradient_norm(x, g, bounds);
        if (result.projected_gradient <= options.grad_tol) {
            result.status = MinimizeStatus::Converged;
            break;
        }
        if (result.iterations >= options.max_iters) {
            result.status = MinimizeStatus::MaxIterations;
            break;
        }
        ++result.iterations;

        for (Eigen::Index i = 0; i < n; ++i) {
            free(i) = !((x(i) <= bounds.lower(i) && g(i) > 0.0) || (x(i) >= bounds.upper(i) && g(i) < 0.0));
        }

        bool accepted = false;
        Eigen::VectorXd trial_x;
        ObjectiveEvaluation trial;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            Eigen::VectorXd d;
            if (attempt == 0 && !memory.empty()) {
                d = lbfgs_direction(memory, g, free);
                if (g.dot(d) >= 0.0) memory.clear();
            }
            if (memory.empty()) {
                // Without curvature information, cap the first trial step at unit length.
                d = lbfgs_direction(memory, g, free);
                const double norm = d.norm();
                if (norm > 1.0) d /= norm;
            }
            double step = 1.0;
            for (int bt = 0; bt < options.max_backtracks; ++bt, step *= 0.5) {
                trial_x = bounds.clamp(x + step * d);
                const Eigen::VectorXd delta = trial_x - x;
                if (delta.lpNorm<Eigen::Infinity>() == 0.0) break;
                trial = evaluate(f, trial_x, result.evaluations);
                const double slope = std::min(0.0, g.dot(delta));
                if (trial.value <= current.value + options.armijo * slope) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) memory.clear();
        }
        if (!accepted) {
            result.status = MinimizeStatus::LineSearchFailure;
            break;
        }

        Pair p{trial_x - x, trial.gradient - g, 0.0};
        const double sy = p.s.dot(p.y);
        if (sy > 1e-12 * p.s.norm() * p.y.norm() && sy > 0.0) {
            p.rho = 1.0 / sy;
            memory.push_back(std::move(p));
            if (int(memory.size()) > std::max(1, options.memory)) memory.pop_front();
        }
        result.x = std::move(trial_x);
        current = std::move(trial);
    }
    result.value = current.value;
    return result;
}

GradientCheck check_gradient(const Objective& f, const Eigen::VectorXd& x) {
    GradientCheck out;
    out.analytic = f(x).gradient;
    out.numeric.resize(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::abs(x(i)));
        probe(i) = x(i) + h;
        const double up = f(probe).value;
        probe(i) = x(i) - h;
        const double down = f(probe).value;
        probe(i) = x(i);
        out.numeric(i) = (up - down) / (2.0 * h);
    }
    const double scale = std::max({out.analytic.lpNorm<Eigen::Infinity>(), out.numeric.lpNorm<Eigen::Infinity>(), 1e-300});
    out.relative_error = (out.analytic - out.numeric).lpNorm<Eigen::Infinity>() / scale;
    return out;
}

}  // namespace mlwave::optim
