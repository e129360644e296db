#include "sgraf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace sgraf {

namespace {

double forward_value(const std::function<Var()>& loss_fn, double* kink_margin) {
    KinkTrace::reset();
    Var root = loss_fn();
    if (!root.value().is_scalar())
        throw ShapeError("finite_diff_check: loss function must return a scalar");
    if (kink_margin) *kink_margin = KinkTrace::min_margin();
    return root.value()[0];
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<Var()>& loss_fn, ParamSet& params,
                                  const GradCheckOptions& options) {
    if (options.step <= 0.0) throw ValueError("finite_diff_check: step must be positive");

    KinkTrace::enable();
    double v0 = forward_value(loss_fn, nullptr);
    double v1 = forward_value(loss_fn, nullptr);
    if (v0 != v1) {
        KinkTrace::disable();
        throw NondeterministicLoss();
    }

    params.zero_grads();
    {
        Var root = loss_fn();
        backward(root);
    }
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& [name, v] : params.items())
        analytic.push_back(v.has_grad() ? v.grad() : Tensor::zeros(v.shape()));

    const double h = options.step;
    const double kink_tol = options.kink_factor * h;
    Rng sampler(options.sample_seed);

    GradCheckReport report;
    for (std::size_t p = 0; p < params.items().size(); ++p) {
        const auto& name = params.items()[p].first;
        Var& v = const_cast<Var&>(params.items()[p].second);
        Tensor& w = v.mutable_value();

        std::vector<std::size_t> indices;
        if (w.size() <= options.samples_per_param) {
            for (std::size_t i = 0; i < w.size(); ++i) indices.push_back(i);
        } else {
            for (std::size_t i = 0; i < options.samples_per_param; ++i)
                indices.push_back(static_cast<std::size_t>(sampler.below(w.size())));
            std::sort(indices.begin(), indices.end());
            indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
        }

        ParamCheck check;
        check.name = name;
        for (std::size_t idx : indices) {
            double saved = w[idx];
            double margin_plus = 0.0, margin_minus = 0.0;
            w[idx] = saved + h;
            double fp = forward_value(loss_fn, &margin_plus);
            w[idx] = saved - h;
            double fm = forward_value(loss_fn, &margin_minus);
            w[idx] = saved;
            if (std::min(margin_plus, margin_minus) <= kink_tol) {
                ++check.skipped;
                continue;
            }
            double numeric = (fp - fm) / (2.0 * h);
            double exact = analytic[p][idx];
            double rel = std::fabs(exact - numeric) /
                         std::max({std::fabs(exact), std::fabs(numeric), 1e-8});
            check.max_rel_err = std::max(check.max_rel_err, rel);
            ++check.checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, check.max_rel_err);
        report.total_checked += check.checked;
        report.total_skipped += check.skipped;
        report.params.push_back(std::move(check));
    }
    KinkTrace::disable();
    return report;
}

}  // namespace sgraf
