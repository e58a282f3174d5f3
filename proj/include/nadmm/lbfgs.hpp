#pragma once

#include "nadmm/objective.hpp"

#include <vector>

namespace nadmm {

struct LbfgsConfig {
    int history = 25;        // number of stored curvature pairs
    double wolfe_c1 = 1e-4;  // sufficient decrease
    double wolfe_c2 = 0.9;   // curvature bound, 0 < c1 < c2 < 1
    int max_iters = 100;
    int ls_max_iters = 20;
    double grad_tol = 1e-8;

    void validate() const;
};

struct LbfgsIterRecord {
    int iter = 0;
    double grad_norm = 0.0;
    double step = 0.0;
    double objective = 0.0;
    int fn_evals = 0;
    bool ls_fallback = false;  // Wolfe search failed, took a small -g step
};

struct LbfgsResult {
    Vector x;
    std::vector<LbfgsIterRecord> trace;
    bool converged = false;
    double final_grad_norm = 0.0;
};

/// Limited-memory BFGS with two-loop recursion and a strong-Wolfe
/// bracket-and-zoom line search. Curvature pairs with s'y <= 1e-10*|s||y| are
/// skipped. A failed line search falls back to x - 1e-3*g.
LbfgsResult lbfgs_solve(const Objective& obj, const Vector& x0, const LbfgsConfig& cfg);

}  // namespace nadmm
