#ifndef SGRAF_GRADCHECK_HPP_
#define SGRAF_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "sgraf/optim.hpp"
#include "sgraf/rng.hpp"

namespace sgraf {

struct NondeterministicLoss : std::runtime_error {
    NondeterministicLoss() : std::runtime_error("loss function is not deterministic") {}
};

struct GradCheckOptions {
    double step = 1e-5;
    // entries sampled per parameter tensor (all entries when the tensor is smaller)
    std::size_t samples_per_param = 8;
    // a probe whose forward pass saw an activation input within
    // kink_factor * step of a non-differentiable point is non-comparable
    double kink_factor = 10.0;
    std::uint64_t sample_seed = 1;
};

struct ParamCheck {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // kink-adjacent probes
};

struct GradCheckReport {
    std::vector<ParamCheck> params;
    double max_rel_err = 0.0;
    std::size_t total_checked = 0;
    std::size_t total_skipped = 0;
};

// Compares reverse-mode gradients of loss_fn against central finite
// differences on sampled entries of every parameter. loss_fn must rebuild the
// expression from the current parameter values on every call; it is evaluated
// twice up front and rejected if the two values differ.
GradCheckReport finite_diff_check(const std::function<Var()>& loss_fn, ParamSet& params,
                                  const GradCheckOptions& options = {});

}  // namespace sgraf

#endif  // SGRAF_GRADCHECK_HPP_
