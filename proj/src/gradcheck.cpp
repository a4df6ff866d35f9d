#include "magnum/gradcheck.hpp"

#include <cmath>

#include "magnum/errors.hpp"

namespace magnum {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Parameter>& params, double eps,
                           std::size_t max_entries_per_param) {
    if (!(eps > 0.0)) throw ContractError("grad_check requires eps > 0");

    for (Parameter& p : params) p.tensor.zero_grad();
    Tensor loss = f();
    if (!std::isfinite(loss.item())) throw NumericError("loss is not finite");
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Parameter& p : params) {
        if (p.tensor.has_grad()) {
            analytic.push_back(p.tensor.grad());
        } else {
            analytic.emplace_back(p.tensor.numel(), 0.0);
        }
    }

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = params[pi];
        std::vector<double>& vals = p.tensor.values_mut();

        // Deterministic evenly-spaced subset when a per-parameter cap is set;
        // a cap of 0 (or >= numel) checks every entry.
        std::size_t picks = vals.size();
        if (max_entries_per_param > 0 && max_entries_per_param < picks) {
            picks = max_entries_per_param;
        }
        for (std::size_t s = 0; s < picks; ++s) {
            const std::size_t i = (picks == vals.size()) ? s : (s * vals.size()) / picks;
            const double original = vals[i];
            vals[i] = original + eps;
            const double fp = f().item();
            vals[i] = original - eps;
            const double fm = f().item();
            vals[i] = original;

            const double numeric = (fp - fm) / (2.0 * eps);
            const double an = analytic[pi][i];
            if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(an)) {
                throw NumericError("non-finite value while checking parameter " + p.name);
            }
            const double rel = std::fabs(an - numeric) / std::max(1e-8, std::fabs(an) + std::fabs(numeric));
            ++report.entries_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p.name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

}  // namespace magnum
