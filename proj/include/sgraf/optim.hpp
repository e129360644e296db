#ifndef SGRAF_OPTIM_HPP_
#define SGRAF_OPTIM_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgraf/autodiff.hpp"

namespace sgraf {

// Insertion-ordered registry of learnable leaves. The order fixes both the
// optimizer update sequence and the serialization layout.
class ParamSet {
public:
    Var add(std::string name, Tensor init) {
        Var v = Var::leaf(std::move(init), true);
        items_.emplace_back(std::move(name), v);
        return v;
    }

    const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

    Var* find(const std::string& name) {
        for (auto& [n, v] : items_)
            if (n == name) return &v;
        return nullptr;
    }

    void zero_grads() {
        for (auto& [n, v] : items_) v.zero_grad();
    }

    std::vector<Tensor> snapshot() const {
        std::vector<Tensor> out;
        out.reserve(items_.size());
        for (const auto& [n, v] : items_) out.push_back(v.value());
        return out;
    }

    void restore(const std::vector<Tensor>& saved) {
        if (saved.size() != items_.size()) throw ShapeError("ParamSet::restore: size mismatch");
        for (std::size_t i = 0; i < saved.size(); ++i) {
            check_same_shape(items_[i].second.value(), saved[i], "ParamSet::restore");
            items_[i].second.mutable_value() = saved[i];
        }
    }

private:
    std::vector<std::pair<std::string, Var>> items_;
};

struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Standard Adam with bias correction; moment buffers follow ParamSet order.
class AdamState {
public:
    AdamState(const ParamSet& params, AdamConfig config) : config_(config) {
        for (const auto& [name, v] : params.items()) {
            first_.push_back(Tensor::zeros(v.shape()));
            second_.push_back(Tensor::zeros(v.shape()));
        }
    }

    void set_learning_rate(double lr) { config_.learning_rate = lr; }
    double learning_rate() const { return config_.learning_rate; }
    std::uint64_t step_count() const { return step_; }
    const AdamConfig& config() const { return config_; }

    void step(ParamSet& params);

private:
    AdamConfig config_;
    std::uint64_t step_ = 0;
    std::vector<Tensor> first_;
    std::vector<Tensor> second_;
};

inline void adam_step(ParamSet& params, AdamState& state) { state.step(params); }

}  // namespace sgraf

#endif  // SGRAF_OPTIM_HPP_
