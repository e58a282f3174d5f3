#include "nadmm/objective.hpp"

#include "nadmm/softmax.hpp"

namespace nadmm {

namespace {

struct SoftmaxMemo {
    Vector x;
    StableExpCache cache;
    bool valid = false;

    const StableExpCache& at(const Dataset& data, const Vector& w) {
        if (!valid || x.size() != w.size() || x != w) {
            cache = stable_exp_cache(data, w);
            x = w;
            valid = true;
        }
        return cache;
    }
};

}  // namespace

Objective make_softmax_objective(std::shared_ptr<const Dataset> data, double lambda) {
    auto memo = std::make_shared<SoftmaxMemo>();
    Objective obj;
    obj.value = [data, lambda, memo](const Vector& x) {
        return loss(*data, memo->at(*data, x), x, lambda);
    };
    obj.grad = [data, lambda, memo](const Vector& x) {
        return gradient(*data, memo->at(*data, x), x, lambda);
    };
    obj.hvp = [data, lambda, memo](const Vector& x, const Vector& v) {
        return hessian_vec(*data, memo->at(*data, x), v, lambda);
    };
    return obj;
}

Objective make_augmented_objective(Objective base, double rho, Vector z, Vector y) {
    if (rho <= 0.0) throw ConfigError("augmented objective requires rho > 0");
    auto zz = std::make_shared<Vector>(std::move(z));
    auto yy = std::make_shared<Vector>(std::move(y));
    Objective obj;
    obj.value = [base, rho, zz, yy](const Vector& x) {
        return base.value(x) + 0.5 * rho * (*zz - x + *yy / rho).squaredNorm();
    };
    obj.grad = [base, rho, zz, yy](const Vector& x) {
        return (base.grad(x) - rho * (*zz - x + *yy / rho)).eval();
    };
    obj.hvp = [base, rho](const Vector& x, const Vector& v) {
        return (base.hvp(x, v) + rho * v).eval();
    };
    return obj;
}

}  // namespace nadmm
