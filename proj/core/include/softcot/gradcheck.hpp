#pragma once

#include <functional>
#include <string>
#include <vector>

#include "softcot/tensor.hpp"

namespace softcot {

struct GradCheckParam {
    std::string name;
    TensorPtr tensor;
};

struct GradCheckParamReport {
    std::string name;
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
    int64_t entries = 0;
};

struct GradCheckReport {
    std::vector<GradCheckParamReport> params;
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
};

// Builds the forward pass (must return a scalar loss) on the graph it is given.
using ForwardFn = std::function<TensorPtr(Graph&)>;

// Central-difference check of analytic gradients. Per entry the relative
// error is |g_analytic - g_fd| / max(|g_fd|, 1e-8). The finite-difference
// side touches only forward evaluations, so it is independent of the
// backward implementation it validates.
GradCheckReport grad_check(const ForwardFn& forward, const std::vector<GradCheckParam>& params,
                           double eps);

}  // namespace softcot
