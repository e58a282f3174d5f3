#pragma once

#include "nadmm/common.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace nadmm {

/// One per outer iteration (ADMM-family) or per epoch (SGD). Fields that do
/// not apply to a solver are NaN / empty and serialize as JSON null, so every
/// row carries the same schema.
struct MetricsRow {
    int iteration = 0;
    double wall_seconds = 0.0;
    double train_objective = std::numeric_limits<double>::quiet_NaN();
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
    double primal_norm = std::numeric_limits<double>::quiet_NaN();
    double dual_norm = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> rho;
    std::uint64_t messages = 0;  // cumulative scatter+gather envelopes
    int inner_iterations = 0;
    double theta = std::numeric_limits<double>::quiet_NaN();
    std::string solver;
};

}  // namespace nadmm
