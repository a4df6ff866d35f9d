#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace magnum {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the define-by-run computation graph. Values are written
// once at construction; only the grad buffer mutates afterwards.
struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;
};

void ensure_grad(Node& node);

}  // namespace detail

// Value-semantic handle to a graph node. Copies alias the same node.
class Tensor {
  public:
    Tensor() = default;

    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->values.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape[axis]; }

    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<double>& values() const { return node_->values; }
    // Leaf-only mutation hook for the optimizer and finite differencing.
    std::vector<double>& values_mut() { return node_->values; }

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Scalar extraction; throws unless numel() == 1.
    double item() const;
    double at(std::size_t i) const { return node_->values[i]; }
    double at(std::size_t i, std::size_t j) const;

    std::shared_ptr<detail::Node> node() const { return node_; }

    static Tensor wrap(std::shared_ptr<detail::Node> node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

  private:
    std::shared_ptr<detail::Node> node_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively
// into every requires_grad node reachable from the loss; leaves keep their
// buffers across calls until zero_grad().
void backward(const Tensor& loss);

}  // namespace magnum
