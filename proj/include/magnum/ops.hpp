#pragma once

#include <vector>

#include "magnum/tensor.hpp"

namespace magnum {

// Differentiable tensor algebra. Every function returns a fresh graph node;
// gradients are accumulated additively by backward().

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
// out[i,j] = a[i,j] + v[j]; the bias-broadcast used by affine layers.
Tensor add_rowwise(const Tensor& a, const Tensor& v);
// Product with a one-element tensor, differentiable in both arguments.
Tensor scale_by(const Tensor& a, const Tensor& s);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor log(const Tensor& a);  // domain error on non-positive entries

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);

Tensor sum(const Tensor& a);                 // scalar
Tensor pick(const Tensor& a, std::size_t flat_index);  // scalar

namespace detail {
// Test hook: when set, tanh's backward is deliberately wrong so that
// gradient verification tooling can prove it catches broken adjoints.
extern bool corrupt_backward_for_tests;
}  // namespace detail

}  // namespace magnum
