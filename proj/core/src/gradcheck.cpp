#include "softcot/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace softcot {

namespace {

double eval_loss(const ForwardFn& forward) {
    Graph g(/*recording=*/false);
    TensorPtr loss = forward(g);
    if (!loss || !loss->is_scalar()) {
        throw ShapeMismatch("grad_check: forward must return a scalar loss");
    }
    return loss->data[0];
}

}  // namespace

GradCheckReport grad_check(const ForwardFn& forward, const std::vector<GradCheckParam>& params,
                           double eps) {
    if (!(eps > 0.0) || eps > 1e-2) {
        throw ConfigError("grad_check: eps must lie in (0, 1e-2]");
    }

    // deterministic-forward precondition, compared bit-for-bit
    const double probe_a = eval_loss(forward);
    const double probe_b = eval_loss(forward);
    if (std::memcmp(&probe_a, &probe_b, sizeof(double)) != 0) {
        throw NonDeterministicForward("grad_check: two identical forward calls disagree");
    }

    GradCheckReport report;
    if (params.empty()) return report;

    for (const auto& p : params) {
        if (!p.tensor->requires_grad) {
            throw MissingGradient("grad_check: parameter '" + p.name + "' has requires_grad=false");
        }
        p.tensor->zero_grad();
    }
    {
        Graph g;
        TensorPtr loss = forward(g);
        g.backward(loss);
    }

    double total_err = 0.0;
    int64_t total_entries = 0;
    for (const auto& p : params) {
        GradCheckParamReport pr;
        pr.name = p.name;
        pr.entries = p.tensor->size();
        double sum_err = 0.0;
        for (int64_t i = 0; i < p.tensor->size(); ++i) {
            const double saved = p.tensor->data[i];
            p.tensor->data[i] = saved + eps;
            const double plus = eval_loss(forward);
            p.tensor->data[i] = saved - eps;
            const double minus = eval_loss(forward);
            p.tensor->data[i] = saved;
            const double fd = (plus - minus) / (2.0 * eps);
            const double rel =
                std::abs(p.tensor->grad[i] - fd) / std::max(std::abs(fd), 1e-8);
            pr.max_rel_err = std::max(pr.max_rel_err, rel);
            sum_err += rel;
        }
        pr.mean_rel_err = pr.entries > 0 ? sum_err / static_cast<double>(pr.entries) : 0.0;
        total_err += sum_err;
        total_entries += pr.entries;
        report.max_rel_err = std::max(report.max_rel_err, pr.max_rel_err);
        report.params.push_back(std::move(pr));
    }
    report.mean_rel_err =
        total_entries > 0 ? total_err / static_cast<double>(total_entries) : 0.0;
    return report;
}

}  // namespace softcot
