#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "magnum/errors.hpp"
#include "magnum/rng.hpp"
#include "magnum/tensor.hpp"

namespace magnum {

// A named leaf of the computation graph. Frozen parameters still receive
// gradients but are never touched by an optimizer step.
struct Parameter {
    std::string name;
    Tensor tensor;
    bool frozen = false;
};

// Flat registry with unique names, kept in construction order so that
// initialization and serialization are deterministic.
class ParamRegistry {
  public:
    Tensor add(const std::string& name, Tensor tensor, bool frozen = false) {
        if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
        index_[name] = params_.size();
        params_.push_back(Parameter{name, tensor, frozen});
        return tensor;
    }

    const std::vector<Parameter>& all() const { return params_; }
    std::vector<Parameter>& all() { return params_; }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Parameter& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter: " + name);
        return params_[it->second];
    }
    const Parameter& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter: " + name);
        return params_[it->second];
    }

    std::vector<Parameter> trainable() const {
        std::vector<Parameter> out;
        for (const Parameter& p : params_)
            if (!p.frozen) out.push_back(p);
        return out;
    }

    std::vector<Parameter> frozen() const {
        std::vector<Parameter> out;
        for (const Parameter& p : params_)
            if (p.frozen) out.push_back(p);
        return out;
    }

    void zero_grad() {
        for (Parameter& p : params_) p.tensor.zero_grad();
    }

  private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Initializers. All draws come from the caller's Rng so a run seed fully
// determines every parameter.
inline Tensor rand_uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = true) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, bool requires_grad = true) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return rand_uniform({fan_in, fan_out}, -bound, bound, rng, requires_grad);
}

}  // namespace magnum
