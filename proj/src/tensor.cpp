#include "magnum/tensor.hpp"

#include <unordered_set>

#include "magnum/errors.hpp"

namespace magnum {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (const std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace detail {

void ensure_grad(Node& node) {
    if (node.grad.empty()) node.grad.assign(node.values.size(), 0.0);
}

}  // namespace detail

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return wrap(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> values(shape_numel(shape), value);
    return from_values(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty()) throw ContractError("tensor has no gradient; run backward first");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() requires a scalar, got shape " + shape_str(shape()));
    return node_->values[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return node_->values[i * node_->shape[1] + j];
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward requires a scalar loss" +
                            (loss.defined() ? ", got shape " + shape_str(loss.shape()) : std::string()));
    }

    // Iterative post-order DFS over inputs; reversing the finished list puts
    // every node before all of its inputs, so each grad is complete when its
    // backward function runs.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    struct Frame {
        detail::Node* node;
        std::size_t next_input;
    };
    std::vector<Frame> stack;
    detail::Node* root = loss.node().get();
    if (root->requires_grad) {
        stack.push_back({root, 0});
        visited.insert(root);
    }
    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.next_input < top.node->inputs.size()) {
            detail::Node* child = top.node->inputs[top.next_input++].get();
            if (child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(top.node);
            stack.pop_back();
        }
    }

    detail::ensure_grad(*root);
    root->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        detail::ensure_grad(*node);
        if (node->backward_fn) node->backward_fn(*node);
    }
}

}  // namespace magnum
