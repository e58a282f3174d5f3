#include "nadmm/lbfgs.hpp"

#include <cmath>
#include <cstdio>
#include <deque>

namespace nadmm {

void LbfgsConfig::validate() const {
    if (history < 1) throw ConfigError("lbfgs history must be >= 1");
    if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
        throw ConfigError("wolfe constants must satisfy 0 < c1 < c2 < 1");
    if (max_iters < 0) throw ConfigError("lbfgs max_iters must be >= 0");
    if (ls_max_iters < 1) throw ConfigError("lbfgs ls_max_iters must be >= 1");
}

namespace {

struct Phi {
    const Objective& obj;
    const Vector& x;
    const Vector& p;
    int evals = 0;

    // f(x + a p) and the directional derivative at a.
    std::pair<double, double> operator()(double a) {
        const Vector xa = x + a * p;
        ++evals;
        return {obj.value(xa), obj.grad(xa).dot(p)};
    }
};

struct WolfeOutcome {
    double alpha = 0.0;
    int evals = 0;
    bool ok = false;
};

// Bracket-and-zoom strong Wolfe search (bisection inside zoom).
WolfeOutcome strong_wolfe(const Objective& obj, const Vector& x, const Vector& p, double f0,
                          double slope0, const LbfgsConfig& cfg) {
    Phi phi{obj, x, p};
    WolfeOutcome out;

    auto zoom = [&](double lo, double f_lo, double hi) -> bool {
        while (phi.evals < cfg.ls_max_iters) {
            const double a = 0.5 * (lo + hi);
            auto [fa, ga] = phi(a);
            if (fa > f0 + cfg.wolfe_c1 * a * slope0 || fa >= f_lo) {
                hi = a;
            } else {
                if (std::abs(ga) <= -cfg.wolfe_c2 * slope0) {
                    out.alpha = a;
                    out.ok = true;
                    return true;
                }
                if (ga * (hi - lo) >= 0.0) hi = lo;
                lo = a;
                f_lo = fa;
            }
        }
        return false;
    };

    double a_prev = 0.0;
    double f_prev = f0;
    double a = 1.0;
    const double a_max = 1e6;
    for (int i = 0; phi.evals < cfg.ls_max_iters; ++i) {
        auto [fa, ga] = phi(a);
        if (fa > f0 + cfg.wolfe_c1 * a * slope0 || (i > 0 && fa >= f_prev)) {
            zoom(a_prev, f_prev, a);
            break;
        }
        if (std::abs(ga) <= -cfg.wolfe_c2 * slope0) {
            out.alpha = a;
            out.ok = true;
            break;
        }
        if (ga >= 0.0) {
            zoom(a, fa, a_prev);
            break;
        }
        a_prev = a;
        f_prev = fa;
        a = std::min(2.0 * a, a_max);
    }
    out.evals = phi.evals;
    return out;
}

}  // namespace

LbfgsResult lbfgs_solve(const Objective& obj, const Vector& x0, const LbfgsConfig& cfg) {
    cfg.validate();
    LbfgsResult result;
    result.x = x0;

    std::deque<Vector> s_hist, y_hist;
    std::deque<double> rho_hist;

    Vector g = obj.grad(result.x);
    double f_x = obj.value(result.x);

    for (int k = 0; k < cfg.max_iters; ++k) {
        const double g_norm = g.norm();
        result.final_grad_norm = g_norm;
        if (g_norm < cfg.grad_tol) {
            result.converged = true;
            return result;
        }

        // Two-loop recursion; empty history yields p = -g.
        Vector q = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) {
            gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        }
        Vector r = gamma * q;
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(r);
            r += (alpha[i] - beta) * s_hist[i];
        }
        Vector p = -r;
        double slope = p.dot(g);
        if (slope >= 0.0) {
            p = -g;
            slope = -g.squaredNorm();
        }

        LbfgsIterRecord rec;
        rec.iter = k;
        rec.grad_norm = g_norm;

        WolfeOutcome ls = strong_wolfe(obj, result.x, p, f_x, slope, cfg);
        rec.fn_evals = ls.evals;
        Vector x_next;
        if (ls.ok) {
            rec.step = ls.alpha;
            x_next = result.x + ls.alpha * p;
        } else {
            std::fprintf(stderr, "[lbfgs] Wolfe search failed at iter %d; taking -g step\n", k);
            rec.ls_fallback = true;
            rec.step = 1e-3;
            x_next = result.x - 1e-3 * g;
        }

        Vector g_next = obj.grad(x_next);
        const Vector s = x_next - result.x;
        const Vector y = g_next - g;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > cfg.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        result.x = std::move(x_next);
        g = std::move(g_next);
        f_x = obj.value(result.x);
        if (!std::isfinite(f_x)) {
            throw SolverError("lbfgs_solve: non-finite objective at iteration " +
                              std::to_string(k));
        }
        rec.objective = f_x;
        result.trace.push_back(rec);
    }
    result.final_grad_norm = g.norm();
    result.converged = result.final_grad_norm < cfg.grad_tol;
    return result;
}

}  // namespace nadmm
