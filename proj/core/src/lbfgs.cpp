#include "aniso/lbfgs.hpp"

#include "aniso/types.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace aniso {

namespace {

struct Pair {
    Eigen::VectorXd s, y;
    double rho;
};

Eigen::VectorXd two_loop(const Eigen::VectorXd& g, const std::deque<Pair>& mem) {
    Eigen::VectorXd q = g;
    std::vector<double> alpha(mem.size());
    for (int k = static_cast<int>(mem.size()) - 1; k >= 0; --k) {
        alpha[k] = mem[k].rho * mem[k].s.dot(q);
        q -= alpha[k] * mem[k].y;
    }
    if (!mem.empty()) {
        const auto& last = mem.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
        const double beta = mem[k].rho * mem[k].y.dot(q);
        q += (alpha[k] - beta) * mem[k].s;
    }
    return -q;
}

} // namespace

LbfgsResult minimize_lbfgs(const Objective& fn, Eigen::VectorXd x0, const LbfgsOptions& opts) {
    if (opts.max_iters < 1) throw InputError("lbfgs: max_iters must be >= 1");
    if (opts.memory < 1) throw InputError("lbfgs: memory must be >= 1");
    if (!(opts.c1 > 0 && opts.c1 < opts.c2 && opts.c2 < 1)) throw InputError("lbfgs: need 0 < c1 < c2 < 1");

    LbfgsResult res;
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = std::move(x0), g(n), gn(n), xn(n);
    double f = fn(x, g);
    ++res.evaluations;
    if (!std::isfinite(f) || !g.allFinite()) throw NumericalError("lbfgs: non-finite objective at start");
    res.initial_grad_norm = g.norm();
    res.trace.push_back({0, f, res.initial_grad_norm, 0});

    std::deque<Pair> mem;
    const double target = opts.grad_tol * res.initial_grad_norm;
    bool first = true;

    auto finish = [&]() {
        res.x = x;
        res.f = f;
        res.grad_norm = g.norm();
        return res;
    };
    if (res.initial_grad_norm <= target || res.initial_grad_norm == 0) {
        res.converged = true;
        return finish();
    }

    for (int it = 1; it <= opts.max_iters; ++it) {
        Eigen::VectorXd d = two_loop(g, mem);
        double gd = g.dot(d);
        if (!(gd < 0)) {
            mem.clear();
            d = -g;
            gd = -g.squaredNorm();
        }
        bool steepest = mem.empty();

        double alpha = 1.0;
        if (first || steepest) {
            alpha = opts.initial_alpha > 0 ? opts.initial_alpha : 1.0 / d.norm();
        }

        // Weak Wolfe bracketing: shrink on Armijo failure, expand on curvature failure.
        bool accepted = false;
        double best_f = f;
        double best_alpha = 0;
        Eigen::VectorXd best_g;
        while (!accepted) {
            double lo = 0, hi = std::numeric_limits<double>::infinity();
            for (int trial = 0; trial < opts.max_line_search; ++trial) {
                xn = x + alpha * d;
                const double fnew = fn(xn, gn);
                ++res.evaluations;
                const bool finite = std::isfinite(fnew) && gn.allFinite();
                if (finite && fnew < best_f) {
                    best_f = fnew;
                    best_alpha = alpha;
                    best_g = gn;
                }
                if (!finite || fnew > f + opts.c1 * alpha * gd) {
                    hi = alpha;
                } else if (gn.dot(d) < opts.c2 * gd) {
                    lo = alpha;
                } else {
                    accepted = true;
                    best_f = fnew;
                    best_alpha = alpha;
                    best_g = gn;
                    break;
                }
                alpha = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
            }
            // No Wolfe point, but a strict decrease was seen: take it (nonsmooth kinks).
            if (!accepted && best_alpha > 0) accepted = true;
            if (accepted) break;
            if (steepest) break;
            mem.clear();
            d = -g;
            gd = -g.squaredNorm();
            steepest = true;
            alpha = opts.initial_alpha > 0 ? opts.initial_alpha : 1.0 / d.norm();
        }
        if (!accepted) {
            res.line_search_failed = true;
            return finish();
        }

        xn = x + best_alpha * d;
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = best_g - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            mem.push_back({s, y, 1.0 / sy});
            if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
        }
        x = xn;
        g = best_g;
        f = best_f;
        first = false;
        res.iterations = it;
        res.trace.push_back({it, f, g.norm(), s.norm()});
        if (g.norm() <= target) {
            res.converged = true;
            break;
        }
    }
    return finish();
}

} // namespace aniso
