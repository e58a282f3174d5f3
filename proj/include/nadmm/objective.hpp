#pragma once

#include "nadmm/dataset.hpp"

#include <functional>
#include <memory>

namespace nadmm {

/// Value / gradient / Hessian-vector triple consumed by the solvers. hvp takes
/// (x, v) and applies the Hessian at x to v.
struct Objective {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> grad;
    std::function<Vector(const Vector&, const Vector&)> hvp;
};

/// Softmax cross-entropy objective over `data`, optionally ridge-regularized.
/// The stabilized-exp cache is memoized on the last-seen x, so the many hvp
/// calls of one Newton iteration share a single cache build. The memo makes
/// instances single-threaded; give each worker its own.
Objective make_softmax_objective(std::shared_ptr<const Dataset> data, double lambda);

/// The ADMM local subproblem: base(x) + (rho/2) * ||z - x + y/rho||^2.
/// grad adds -rho*(z - x + y/rho); hvp adds rho*v.
Objective make_augmented_objective(Objective base, double rho, Vector z, Vector y);

}  // namespace nadmm
