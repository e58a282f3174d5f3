#pragma once

#include "nadmm/objective.hpp"

#include <vector>

namespace nadmm {

struct NewtonConfig {
    double cg_tol = 1e-4;        // theta in (0,1): CG stops at ||Hp + g|| <= theta*||g||
    int cg_max_iters = 10;
    double armijo_beta = 1e-4;   // sufficient-decrease constant in (0,1)
    double backtrack_gamma = 0.5;
    int ls_max_iters = 10;
    double grad_tol = 1e-8;      // stop when ||g|| < grad_tol
    int newton_max_iters = 100;

    void validate() const;
};

struct CgResult {
    Vector p;
    int iters = 0;
    double achieved_residual = 0.0;  // ||apply_H(p) + g|| at exit, recomputed directly
    bool negative_curvature = false;
};

/// CG from p0 = 0 on H p = -g, stopping at ||Hp + g|| <= theta*||g|| or after
/// max_iters. Negative curvature under round-off returns the current iterate
/// (-g when it appears on the first step). Non-finite recurrence values raise
/// SolverError; callers fall back to steepest descent.
CgResult cg_solve(const std::function<Vector(const Vector&)>& apply_H, const Vector& g,
                  double theta, int max_iters);

struct LineSearchResult {
    double alpha = 1.0;
    int evals = 0;
    bool capped = false;  // gave up after ls_max_iters backtracks
};

/// Backtracking Armijo search from alpha = 1: accept the first alpha = gamma^j
/// with value(x + alpha*p) <= f_x + alpha*beta*p'g, else return the last
/// tested alpha flagged `capped`. Requires p'g < 0.
LineSearchResult line_search(const Objective& obj, const Vector& x, const Vector& p,
                             const Vector& g, double f_x, const NewtonConfig& cfg);

struct NewtonIterRecord {
    int iter = 0;
    double grad_norm = 0.0;
    double step = 0.0;
    int cg_iters = 0;
    double cg_residual = 0.0;
    double objective = 0.0;  // value after the step
    bool ls_capped = false;
    bool cg_fallback = false;
    int fn_evals = 0;
};

struct NewtonResult {
    Vector x;
    std::vector<NewtonIterRecord> trace;
    bool converged = false;       // ||g|| < grad_tol reached
    double final_grad_norm = 0.0;
};

/// Inexact Newton: per iteration solve H p = -g by truncated CG, take the
/// Armijo step, stop when ||g|| < grad_tol or after newton_max_iters.
NewtonResult newton_solve(const Objective& obj, const Vector& x0, const NewtonConfig& cfg);

}  // namespace nadmm
