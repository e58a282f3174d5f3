#include "nadmm/softmax.hpp"

#include <cmath>

namespace nadmm {

namespace detail {

namespace {
std::atomic<double>* g_exp_probe = nullptr;

void record_max_exponent(double m) {
    std::atomic<double>* probe = g_exp_probe;
    if (!probe) return;
    double prev = probe->load(std::memory_order_relaxed);
    while (m > prev && !probe->compare_exchange_weak(prev, m, std::memory_order_relaxed)) {
    }
}
}  // namespace

std::atomic<double>* exp_probe() { return g_exp_probe; }
void arm_exp_probe(std::atomic<double>* probe) { g_exp_probe = probe; }

Eigen::ArrayXXd probed_exp(const Eigen::ArrayXXd& exponents) {
    if (exponents.size() > 0) record_max_exponent(exponents.maxCoeff());
    return exponents.exp();
}

Eigen::ArrayXd probed_exp(const Eigen::ArrayXd& exponents) {
    if (exponents.size() > 0) record_max_exponent(exponents.maxCoeff());
    return exponents.exp();
}

}  // namespace detail

namespace {

void check_weight_dim(const Dataset& data, const Vector& w, const char* op) {
    if (w.size() != data.weight_dim()) {
        throw ConfigError(std::string(op) + ": weight vector has " + std::to_string(w.size()) +
                          " entries, expected (C-1)*p = " + std::to_string(data.weight_dim()));
    }
}

}  // namespace

Eigen::Map<const Matrix> weight_blocks(const Vector& w, Index p, int num_classes) {
    return Eigen::Map<const Matrix>(w.data(), p, num_classes - 1);
}

StableExpCache stable_exp_cache(const Dataset& data, const Vector& w) {
    check_weight_dim(data, w, "stable_exp_cache");
    StableExpCache cache;
    cache.logits = data.multiply(weight_blocks(w, data.p(), data.num_classes()));
    // M(a) = max{0, logits of the row}, so every exponent below is <= 0.
    cache.row_max = cache.logits.rowwise().maxCoeff().cwiseMax(0.0);
    Eigen::ArrayXXd shifted =
        detail::probed_exp((cache.logits.colwise() - cache.row_max).array());
    cache.alpha = detail::probed_exp((-cache.row_max).array()).matrix() +
                  shifted.rowwise().sum().matrix();
    cache.probs = (shifted.colwise() / cache.alpha.array()).matrix();
    return cache;
}

double loss(const Dataset& data, const Vector& w, double lambda) {
    return loss(data, stable_exp_cache(data, w), w, lambda);
}

double loss(const Dataset& data, const StableExpCache& cache, const Vector& w, double lambda) {
    check_weight_dim(data, w, "loss");
    double total = cache.row_max.sum() + cache.alpha.array().log().sum();
    for (Index i = 0; i < data.n(); ++i) {
        const int b = data.label(i);
        if (b <= data.num_classes() - 1) total -= cache.logits(i, b - 1);
    }
    if (lambda > 0.0) total += 0.5 * lambda * w.squaredNorm();
    return total;
}

Vector gradient(const Dataset& data, const Vector& w, double lambda) {
    return gradient(data, stable_exp_cache(data, w), w, lambda);
}

Vector gradient(const Dataset& data, const StableExpCache& cache, const Vector& w, double lambda) {
    check_weight_dim(data, w, "gradient");
    Matrix coeff = cache.probs;  // n x (C-1)
    for (Index i = 0; i < data.n(); ++i) {
        const int b = data.label(i);
        if (b <= data.num_classes() - 1) coeff(i, b - 1) -= 1.0;
    }
    Matrix grad_blocks = data.multiply_transposed(coeff);  // p x (C-1)
    Vector g = Eigen::Map<const Vector>(grad_blocks.data(), grad_blocks.size());
    if (lambda > 0.0) g += lambda * w;
    return g;
}

Vector hessian_vec(const Dataset& data, const StableExpCache& cache, const Vector& v,
                   double lambda) {
    if (v.size() != data.weight_dim()) {
        throw ConfigError("hessian_vec: direction has " + std::to_string(v.size()) +
                          " entries, expected " + std::to_string(data.weight_dim()));
    }
    const Matrix vmat = data.multiply(weight_blocks(v, data.p(), data.num_classes()));
    // U = V.W - W.((V.W)e)e^T, elementwise products with the per-row sum of V.W.
    Eigen::ArrayXXd vw = vmat.array() * cache.probs.array();
    Eigen::ArrayXd row_sum = vw.rowwise().sum();
    Matrix u = (vw - cache.probs.array().colwise() * row_sum).matrix();
    Matrix hv_blocks = data.multiply_transposed(u);  // p x (C-1)
    Vector hv = Eigen::Map<const Vector>(hv_blocks.data(), hv_blocks.size());
    if (lambda > 0.0) hv += lambda * v;
    return hv;
}

Vector hessian_vec(const Dataset& data, const Vector& w, const Vector& v, double lambda) {
    return hessian_vec(data, stable_exp_cache(data, w), v, lambda);
}

std::vector<std::int32_t> predict(const Dataset& data, const Vector& w) {
    const StableExpCache cache = stable_exp_cache(data, w);
    const int C = data.num_classes();
    // Residual class C has probability exp(-M)/alpha.
    const Eigen::ArrayXd residuals =
        detail::probed_exp((-cache.row_max).array()) / cache.alpha.array();
    std::vector<std::int32_t> labels(static_cast<std::size_t>(data.n()));
    for (Index i = 0; i < data.n(); ++i) {
        double best = cache.probs.row(i).maxCoeff();
        double residual = residuals(i);
        int arg = 0;
        for (int c = 0; c < C - 1; ++c) {
            if (cache.probs(i, c) == best) {
                arg = c + 1;
                break;
            }
        }
        if (residual > best) arg = C;
        labels[static_cast<std::size_t>(i)] = arg;
    }
    return labels;
}

double accuracy(const std::vector<std::int32_t>& predicted,
                const std::vector<std::int32_t>& truth) {
    if (predicted.size() != truth.size()) {
        throw ConfigError("accuracy: length mismatch " + std::to_string(predicted.size()) +
                          " vs " + std::to_string(truth.size()));
    }
    if (predicted.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == truth[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace nadmm
