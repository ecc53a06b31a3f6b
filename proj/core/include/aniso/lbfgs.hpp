#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace aniso {

/// Returns f(x) and writes the gradient into g (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

struct LbfgsOptions {
    int max_iters = 500;
    double grad_tol = 1e-3; // relative to the initial gradient norm
    int memory = 7;
    int max_line_search = 30;
    double c1 = 1e-4;
    double c2 = 0.9;
    /// Trial multiplier for steepest-descent steps, x - alpha * g (0 means unit step length).
    double initial_alpha = 0;
};

struct LbfgsIteration {
    int iter = 0;
    double f = 0;
    double grad_norm = 0;
    double step = 0; // |x_{k+1} - x_k|
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = 0;
    double grad_norm = 0;
    double initial_grad_norm = 0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool line_search_failed = false;
    std::vector<LbfgsIteration> trace; // row 0 is the starting point
};

/// Limited-memory BFGS with a weak-Wolfe bracketing line search. History is dropped after an
/// ascent direction or a failed search; a search that fails from steepest descent ends the run
/// with `line_search_failed` and the best point seen.
LbfgsResult minimize_lbfgs(const Objective& fn, Eigen::VectorXd x0, const LbfgsOptions& opts = {});

} // namespace aniso
