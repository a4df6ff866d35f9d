#pragma once

#include <functional>
#include <string>
#include <vector>

#include "magnum/param.hpp"
#include "magnum/tensor.hpp"

namespace magnum {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
};

// Compares analytic gradients of the scalar f() against central finite
// differences for every entry of every listed parameter. The relative error
// is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// f must be deterministic; throws NumericError naming the parameter if a
// non-finite value shows up. A nonzero max_entries_per_param caps the probes
// per parameter to that many evenly spaced entries (every parameter is still
// visited); 0 checks everything.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Parameter>& params, double eps,
                           std::size_t max_entries_per_param = 0);

}  // namespace magnum
