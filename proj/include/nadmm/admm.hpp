#pragma once

#include "nadmm/comm.hpp"
#include "nadmm/dataset.hpp"
#include "nadmm/lbfgs.hpp"
#include "nadmm/metrics.hpp"
#include "nadmm/newton.hpp"

#include <optional>
#include <vector>

namespace nadmm {

/// Consensus state after k completed outer iterations: global iterate z, and
/// per worker the local iterate x_i, dual y_i, intermediate dual y_hat_i, and
/// penalty rho_i. Snapshots back the spectral penalty secants.
struct AdmmState {
    Vector z;
    Vector prev_z;
    std::vector<Vector> x;
    std::vector<Vector> y;
    std::vector<Vector> y_hat;
    std::vector<double> rho;
    int k = 0;

    Vector z_snap;
    std::vector<Vector> x_snap;
    std::vector<Vector> y_snap;
    std::vector<Vector> y_hat_snap;
    int snap_iteration = 0;

    static AdmmState initial(Index d, int n_workers, double rho0);
    int n_workers() const { return static_cast<int>(x.size()); }
    void take_snapshot();
};

struct PenaltyPolicy {
    enum class Kind { fixed, spectral };
    Kind kind = Kind::fixed;
    double rho0 = 1.0;
    int update_period = 2;      // T_f
    double eps_cor = 0.2;       // correlation safeguard threshold
    double rho_min = 1e-6;
    double rho_max = 1e6;

    void validate() const;
};

struct StoppingConfig {
    double eps_abs = 1e-3;
    double eps_rel = 1e-3;
    int max_outer_iters = 300;
    /// false: squared norms inside the max terms, as printed in the source
    /// formulas; true: conventional (unsquared) norms.
    bool standard_norms = false;
};

/// Closed-form consensus update: (sum_i rho_i x_i - y_i) / (lambda + sum_i rho_i),
/// accumulated over workers in a fixed pairwise tree (ascending id).
Vector z_update(const AdmmState& state, double lambda);

/// Dual ascent: y_i + rho_i * (z - x_i), with z already advanced.
std::vector<Vector> y_update(const AdmmState& state);

struct Residuals {
    std::vector<double> primal;  // ||z - x_i||
    std::vector<double> dual;    // ||rho_i (z - prev_z)||
    double primal_total = 0.0;   // stacked norms
    double dual_total = 0.0;
};

Residuals residuals(const AdmmState& state);

struct Tolerances {
    double eps_pri = 0.0;
    double eps_dual = 0.0;
};

Tolerances tolerances(const AdmmState& state, const StoppingConfig& cfg);

/// True iff k >= 1 and every worker's primal and dual residual norms are
/// within the tolerances.
bool has_converged(const AdmmState& state, const StoppingConfig& cfg);

struct SpectralEvent {
    int iteration = 0;
    int worker = 0;
    bool x_side_ok = false;
    bool z_side_ok = false;
    double rho_before = 0.0;
    double rho_after = 0.0;
};

struct SpectralUpdate {
    std::vector<double> rho;
    std::vector<SpectralEvent> events;
};

/// Per-worker spectral penalty estimate from the secant pairs accumulated
/// since the last snapshot. Sides failing the correlation safeguard are
/// dropped; when both fail the penalty is left unchanged. Always clamped to
/// [rho_min, rho_max].
SpectralUpdate spectral_update(const AdmmState& state, const PenaltyPolicy& policy);

enum class InnerSolverKind { newton, lbfgs };

struct AdmmConfig {
    int n_workers = 4;
    double lambda = 1e-5;
    PenaltyPolicy penalty;
    StoppingConfig stopping;
    InnerSolverKind inner_solver = InnerSolverKind::newton;
    NewtonConfig newton;     // ADMM inner budget = inner_iters below
    LbfgsConfig lbfgs;
    int inner_iters = 1;     // inner solver iterations per outer iteration
    double wall_clock_budget = 0.0;  // seconds; 0 disables
};

struct AdmmRunResult {
    Vector z;
    std::vector<MetricsRow> metrics;
    TransportStats stats;
    std::vector<SpectralEvent> spectral_events;
    bool converged = false;
    int iterations = 0;
};

/// Optional evaluation inputs for the metrics stream.
struct EvalContext {
    const Dataset* test = nullptr;
    std::optional<double> f_star;
};

/// Drives Algorithm-style consensus rounds over an already-populated
/// transport: scatter (z, y_i, rho_i), workers run their warm-started inner
/// solver, gather x_i, then the z/y/penalty updates. One communication round
/// per outer iteration. `parts` are the coordinator-side copies used only for
/// objective evaluation in the metrics stream.
AdmmRunResult run_admm(Transport& transport, const std::vector<Dataset>& parts,
                       const AdmmConfig& cfg, const EvalContext& eval = {});

}  // namespace nadmm
