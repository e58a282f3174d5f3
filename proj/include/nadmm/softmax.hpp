#pragma once

#include "nadmm/dataset.hpp"

#include <atomic>
#include <vector>

namespace nadmm {

namespace detail {

/// Test hook: when armed, records the largest exponent ever handed to exp().
/// The stabilized evaluation keeps every exponent <= 0; tests arm the probe
/// and assert that bound.
std::atomic<double>* exp_probe();
void arm_exp_probe(std::atomic<double>* probe);

Eigen::ArrayXXd probed_exp(const Eigen::ArrayXXd& exponents);
Eigen::ArrayXd probed_exp(const Eigen::ArrayXd& exponents);

}  // namespace detail

/// Per-row quantities of the stabilized softmax evaluation at weights w:
/// logits(i,c) = <a_i, x_c>, row_max(i) = max{0, logits row i},
/// alpha(i) = exp(-M) + sum_c exp(logit - M), probs(i,c) = class-c probability.
/// Depends only on (data, w); reused across loss/gradient and all
/// Hessian-vector products at the same w.
struct StableExpCache {
    Matrix logits;    // n x (C-1)
    Vector row_max;   // >= 0
    Vector alpha;     // >= 1
    Matrix probs;     // n x (C-1), probs(i,c) = exp(logit - M) / alpha
};

/// Interpret a flat weight vector as the p x (C-1) matrix whose column c-1 is
/// the class-c block.
Eigen::Map<const Matrix> weight_blocks(const Vector& w, Index p, int num_classes);

StableExpCache stable_exp_cache(const Dataset& data, const Vector& w);

/// Cross-entropy loss, stabilized. Adds (lambda/2)*||w||^2 when lambda > 0.
double loss(const Dataset& data, const Vector& w, double lambda);
double loss(const Dataset& data, const StableExpCache& cache, const Vector& w, double lambda);

/// Analytic gradient: block c accumulates (probs(i,c) - 1[b_i = c]) * a_i, plus lambda * x_c.
Vector gradient(const Dataset& data, const Vector& w, double lambda);
Vector gradient(const Dataset& data, const StableExpCache& cache, const Vector& w, double lambda);

/// Matrix-free Hessian-vector product at the weights underlying `cache`.
/// Never forms the d x d Hessian; scratch memory is Theta(n * (C-1)).
Vector hessian_vec(const Dataset& data, const StableExpCache& cache, const Vector& v, double lambda);
Vector hessian_vec(const Dataset& data, const Vector& w, const Vector& v, double lambda);

/// Most-probable class per row; ties resolve to the smallest class index.
std::vector<std::int32_t> predict(const Dataset& data, const Vector& w);

/// Fraction of exact label matches.
double accuracy(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& truth);

}  // namespace nadmm
