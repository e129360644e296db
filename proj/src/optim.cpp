#include "sgraf/optim.hpp"

#include <cmath>

namespace sgraf {

void AdamState::step(ParamSet& params) {
    if (params.size() != first_.size()) throw ShapeError("adam_step: parameter count changed");
    ++step_;
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params.items().size(); ++p) {
        Var& v = const_cast<Var&>(params.items()[p].second);
        Tensor& w = v.mutable_value();
        if (!w.same_shape(first_[p])) throw ShapeError("adam_step: moment shape mismatch");
        const bool has_grad = v.has_grad();
        Tensor& m = first_[p];
        Tensor& s = second_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            double g = has_grad ? v.grad()[i] : 0.0;
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            s[i] = config_.beta2 * s[i] + (1.0 - config_.beta2) * g * g;
            double mhat = m[i] / bc1;
            double shat = s[i] / bc2;
            w[i] -= config_.learning_rate * mhat / (std::sqrt(shat) + config_.epsilon);
        }
    }
}

}  // namespace sgraf
