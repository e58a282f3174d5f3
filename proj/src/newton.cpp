#include "nadmm/newton.hpp"

#include <cmath>
#include <cstdio>

namespace nadmm {

void NewtonConfig::validate() const {
    if (cg_tol <= 0.0 || cg_tol >= 1.0) throw ConfigError("cg_tol must lie in (0,1)");
    if (armijo_beta <= 0.0 || armijo_beta >= 1.0) throw ConfigError("armijo_beta must lie in (0,1)");
    if (backtrack_gamma <= 0.0 || backtrack_gamma >= 1.0)
        throw ConfigError("backtrack_gamma must lie in (0,1)");
    if (cg_max_iters < 1) throw ConfigError("cg_max_iters must be >= 1");
    if (ls_max_iters < 0) throw ConfigError("ls_max_iters must be >= 0");
    if (newton_max_iters < 0) throw ConfigError("newton_max_iters must be >= 0");
    if (grad_tol < 0.0) throw ConfigError("grad_tol must be >= 0");
}

CgResult cg_solve(const std::function<Vector(const Vector&)>& apply_H, const Vector& g,
                  double theta, int max_iters) {
    const double g_norm = g.norm();
    if (!(g_norm > 0.0)) throw ConfigError("cg_solve requires ||g|| > 0");

    CgResult out;
    out.p = Vector::Zero(g.size());
    Vector r = -g;  // residual of H p = -g at p = 0
    Vector d = r;
    double r_sq = r.squaredNorm();
    const double stop = theta * g_norm;

    for (int it = 0; it < max_iters; ++it) {
        const Vector hd = apply_H(d);
        const double curvature = d.dot(hd);
        if (!std::isfinite(curvature)) throw SolverError("non-finite value in CG recurrence");
        if (curvature <= 0.0) {
            // Round-off indefiniteness: keep the current iterate, or fall back
            // to steepest descent when nothing has been accumulated yet.
            if (it == 0) out.p = -g;
            out.negative_curvature = true;
            break;
        }
        const double alpha = r_sq / curvature;
        out.p += alpha * d;
        r -= alpha * hd;
        ++out.iters;
        const double r_sq_next = r.squaredNorm();
        if (!std::isfinite(r_sq_next)) throw SolverError("non-finite value in CG recurrence");
        if (std::sqrt(r_sq_next) <= stop) break;
        d = r + (r_sq_next / r_sq) * d;
        r_sq = r_sq_next;
    }
    out.achieved_residual = (apply_H(out.p) + g).norm();
    return out;
}

LineSearchResult line_search(const Objective& obj, const Vector& x, const Vector& p,
                             const Vector& g, double f_x, const NewtonConfig& cfg) {
    const double slope = p.dot(g);
    LineSearchResult out;
    out.alpha = 1.0;
    for (int i = 0;; ++i) {
        const double f_trial = obj.value(x + out.alpha * p);
        ++out.evals;
        if (f_trial <= f_x + out.alpha * cfg.armijo_beta * slope) return out;
        if (i >= cfg.ls_max_iters) {
            out.capped = true;
            return out;
        }
        out.alpha *= cfg.backtrack_gamma;
    }
}

NewtonResult newton_solve(const Objective& obj, const Vector& x0, const NewtonConfig& cfg) {
    cfg.validate();
    NewtonResult result;
    result.x = x0;
    double f_x = obj.value(result.x);
    if (!std::isfinite(f_x)) throw SolverError("newton_solve: non-finite objective at start");

    for (int k = 0; k < cfg.newton_max_iters; ++k) {
        Vector g = obj.grad(result.x);
        const double g_norm = g.norm();
        result.final_grad_norm = g_norm;
        if (g_norm < cfg.grad_tol) {
            result.converged = true;
            return result;
        }

        NewtonIterRecord rec;
        rec.iter = k;
        rec.grad_norm = g_norm;

        Vector p;
        auto apply = [&](const Vector& v) { return obj.hvp(result.x, v); };
        try {
            CgResult cg = cg_solve(apply, g, cfg.cg_tol, cfg.cg_max_iters);
            p = std::move(cg.p);
            rec.cg_iters = cg.iters;
            rec.cg_residual = cg.achieved_residual;
        } catch (const SolverError& e) {
            std::fprintf(stderr, "[newton] CG failed (%s); using steepest descent\n", e.what());
            p = -g;
            rec.cg_fallback = true;
        }
        if (p.dot(g) >= 0.0) {
            // Not a descent direction (can only happen via round-off); use -g.
            p = -g;
            rec.cg_fallback = true;
        }

        LineSearchResult ls = line_search(obj, result.x, p, g, f_x, cfg);
        rec.step = ls.alpha;
        rec.ls_capped = ls.capped;
        rec.fn_evals = ls.evals;
        if (ls.capped) {
            std::fprintf(stderr, "[newton] line search capped at alpha=%.3e (iter %d)\n", ls.alpha,
                         k);
        }

        result.x += ls.alpha * p;
        f_x = obj.value(result.x);
        if (!std::isfinite(f_x)) {
            throw SolverError("newton_solve: non-finite objective at iteration " +
                              std::to_string(k) + " (step " + std::to_string(ls.alpha) + ")");
        }
        rec.objective = f_x;
        result.trace.push_back(rec);
    }
    result.final_grad_norm = obj.grad(result.x).norm();
    result.converged = result.final_grad_norm < cfg.grad_tol;
    return result;
}

}  // namespace nadmm
