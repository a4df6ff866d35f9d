#include "magnum/ops.hpp"

#include <algorithm>
#include <cmath>

#include "magnum/errors.hpp"

namespace magnum {

namespace detail {
bool corrupt_backward_for_tests = false;
}

namespace {

using detail::Node;
using detail::ensure_grad;

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    bool rg = false;
    for (const Tensor& t : inputs) rg = rg || t.requires_grad();
    node->requires_grad = rg;
    if (rg) {
        node->inputs.reserve(inputs.size());
        for (const Tensor& t : inputs) node->inputs.push_back(t.node());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor::wrap(std::move(node));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + " operands differ: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

void check_rank2(const Tensor& a, const char* op) {
    if (a.rank() != 2) {
        throw DimensionError(std::string(op) + " requires a rank-2 tensor, got " + shape_str(a.shape()));
    }
}

// Decomposes a shape around an axis into (outer, len, inner) so that the
// flat index of element (o, l, i) is (o * len + l) * inner + i.
struct AxisView {
    std::size_t outer = 1, len = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    }
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
    v.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
    return v;
}

Tensor unary_elementwise(const Tensor& a, std::vector<double> out,
                         std::function<void(Node&)> backward_fn) {
    return make_op(a.shape(), std::move(out), {a}, std::move(backward_fn));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        const double* arow = av + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            if (aik == 0.0) continue;
            const double* brow = bv + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    return make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        const double* g = self.grad.data();
        if (na.requires_grad) {
            ensure_grad(na);
            // dA[i,k] += sum_j dC[i,j] * B[k,j]
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g + i * n;
                double* darow = na.grad.data() + i * k;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double* brow = nb.values.data() + kk * n;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    darow[kk] += acc;
                }
            }
        }
        if (nb.requires_grad) {
            ensure_grad(nb);
            // dB[k,j] += sum_i A[i,k] * dC[i,j]
            for (std::size_t i = 0; i < m; ++i) {
                const double* arow = na.values.data() + i * k;
                const double* grow = g + i * n;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double aik = arow[kk];
                    if (aik == 0.0) continue;
                    double* dbrow = nb.grad.data() + kk * n;
                    for (std::size_t j = 0; j < n; ++j) dbrow[j] += aik * grow[j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    check_rank2(a, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
    return make_op({n, m}, std::move(out), {a}, [m, n](Node& self) {
        Node& na = *self.inputs[0];
        if (!na.requires_grad) return;
        ensure_grad(na);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) na.grad[i * n + j] += self.grad[j * m + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (int which = 0; which < 2; ++which) {
            Node& in = *self.inputs[which];
            if (!in.requires_grad) continue;
            ensure_grad(in);
            for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        if (na.requires_grad) {
            ensure_grad(na);
            for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i];
        }
        if (nb.requires_grad) {
            ensure_grad(nb);
            for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        if (na.requires_grad) {
            ensure_grad(na);
            for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i] * nb.values[i];
        }
        if (nb.requires_grad) {
            ensure_grad(nb);
            for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] += self.grad[i] * na.values[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    return unary_elementwise(a, std::move(out), [c](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += c * self.grad[i];
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + c;
    return unary_elementwise(a, std::move(out), [](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
    });
}

Tensor add_rowwise(const Tensor& a, const Tensor& v) {
    check_rank2(a, "add_rowwise");
    const std::size_t m = a.dim(0), n = a.dim(1);
    if (v.numel() != n) {
        throw DimensionError("add_rowwise bias " + shape_str(v.shape()) + " does not match row width of " +
                             shape_str(a.shape()));
    }
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.values()[i * n + j] + v.values()[j];
    return make_op(a.shape(), std::move(out), {a, v}, [m, n](Node& self) {
        Node& na = *self.inputs[0];
        Node& nv = *self.inputs[1];
        if (na.requires_grad) {
            ensure_grad(na);
            for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i];
        }
        if (nv.requires_grad) {
            ensure_grad(nv);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) nv.grad[j] += self.grad[i * n + j];
        }
    });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
    if (s.numel() != 1) throw DimensionError("scale_by factor must be a scalar, got " + shape_str(s.shape()));
    const double sv = s.values()[0];
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * sv;
    return make_op(a.shape(), std::move(out), {a, s}, [sv](Node& self) {
        Node& na = *self.inputs[0];
        Node& ns = *self.inputs[1];
        if (na.requires_grad) {
            ensure_grad(na);
            for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += sv * self.grad[i];
        }
        if (ns.requires_grad) {
            ensure_grad(ns);
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * na.values[i];
            ns.grad[0] += acc;
        }
    });
}

Tensor tanh(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
    return unary_elementwise(a, std::move(out), [](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        const double fudge = detail::corrupt_backward_for_tests ? 1.25 : 1.0;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.values[i];
            in.grad[i] += fudge * self.grad[i] * (1.0 - y * y);
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.values()[i];
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return unary_elementwise(a, std::move(out), [](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.values[i];
            in.grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.values()[i];
        out[i] = x > 0.0 ? x : slope * x;
    }
    return unary_elementwise(a, std::move(out), [slope](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            in.grad[i] += self.grad[i] * (in.values[i] > 0.0 ? 1.0 : slope);
        }
    });
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.values()[i];
        if (!(x > 0.0)) {
            throw DomainError("log input must be strictly positive, got " + std::to_string(x) +
                              " at index " + std::to_string(i));
        }
        out[i] = std::log(x);
    }
    return unary_elementwise(a, std::move(out), [](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i] / in.values[i];
    });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    const AxisView v = axis_view(a.shape(), axis);
    std::vector<double> out(a.numel());
    const double* x = a.values().data();
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
            const std::size_t base = o * v.len * v.inner + i;
            double mx = x[base];
            for (std::size_t l = 1; l < v.len; ++l) mx = std::max(mx, x[base + l * v.inner]);
            double denom = 0.0;
            for (std::size_t l = 0; l < v.len; ++l) {
                const double e = std::exp(x[base + l * v.inner] - mx);
                out[base + l * v.inner] = e;
                denom += e;
            }
            for (std::size_t l = 0; l < v.len; ++l) out[base + l * v.inner] /= denom;
        }
    }
    return make_op(a.shape(), std::move(out), {a}, [v](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        // dx = y * (dy - sum(dy * y)) per line
        for (std::size_t o = 0; o < v.outer; ++o) {
            for (std::size_t i = 0; i < v.inner; ++i) {
                const std::size_t base = o * v.len * v.inner + i;
                double dot = 0.0;
                for (std::size_t l = 0; l < v.len; ++l) {
                    const std::size_t idx = base + l * v.inner;
                    dot += self.grad[idx] * self.values[idx];
                }
                for (std::size_t l = 0; l < v.len; ++l) {
                    const std::size_t idx = base + l * v.inner;
                    in.grad[idx] += self.values[idx] * (self.grad[idx] - dot);
                }
            }
        }
    });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
    const AxisView v = axis_view(a.shape(), axis);
    std::vector<double> out(a.numel());
    const double* x = a.values().data();
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
            const std::size_t base = o * v.len * v.inner + i;
            double mx = x[base];
            for (std::size_t l = 1; l < v.len; ++l) mx = std::max(mx, x[base + l * v.inner]);
            double denom = 0.0;
            for (std::size_t l = 0; l < v.len; ++l) denom += std::exp(x[base + l * v.inner] - mx);
            const double lse = mx + std::log(denom);
            for (std::size_t l = 0; l < v.len; ++l) {
                const std::size_t idx = base + l * v.inner;
                out[idx] = x[idx] - lse;
            }
        }
    }
    return make_op(a.shape(), std::move(out), {a}, [v](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        // dx = dy - softmax(x) * sum(dy) per line
        for (std::size_t o = 0; o < v.outer; ++o) {
            for (std::size_t i = 0; i < v.inner; ++i) {
                const std::size_t base = o * v.len * v.inner + i;
                double gsum = 0.0;
                for (std::size_t l = 0; l < v.len; ++l) gsum += self.grad[base + l * v.inner];
                for (std::size_t l = 0; l < v.len; ++l) {
                    const std::size_t idx = base + l * v.inner;
                    in.grad[idx] += self.grad[idx] - std::exp(self.values[idx]) * gsum;
                }
            }
        }
    });
}

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis) {
    if (tensors.empty()) throw ContractError("concat requires at least one tensor");
    const std::size_t rank = tensors[0].rank();
    if (axis >= rank) throw DimensionError("concat axis " + std::to_string(axis) + " out of range");
    Shape out_shape = tensors[0].shape();
    out_shape[axis] = 0;
    for (const Tensor& t : tensors) {
        if (t.rank() != rank) {
            throw DimensionError("concat rank mismatch: " + shape_str(tensors[0].shape()) + " vs " +
                                 shape_str(t.shape()));
        }
        for (std::size_t d = 0; d < rank; ++d) {
            if (d != axis && t.shape()[d] != tensors[0].shape()[d]) {
                throw DimensionError("concat non-axis dimensions disagree: " +
                                     shape_str(tensors[0].shape()) + " vs " + shape_str(t.shape()));
            }
        }
        out_shape[axis] += t.shape()[axis];
    }

    const AxisView v = axis_view(out_shape, axis);
    std::vector<double> out(shape_numel(out_shape));
    std::vector<std::size_t> extents;
    extents.reserve(tensors.size());
    for (const Tensor& t : tensors) extents.push_back(t.shape()[axis]);

    for (std::size_t o = 0; o < v.outer; ++o) {
        std::size_t offset = 0;
        for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
            const std::size_t block = extents[ti] * v.inner;
            const double* src = tensors[ti].values().data() + o * block;
            double* dst = out.data() + (o * v.len + offset) * v.inner;
            std::copy(src, src + block, dst);
            offset += extents[ti];
        }
    }

    return make_op(std::move(out_shape), std::move(out), tensors, [v, extents](Node& self) {
        for (std::size_t o = 0; o < v.outer; ++o) {
            std::size_t offset = 0;
            for (std::size_t ti = 0; ti < self.inputs.size(); ++ti) {
                Node& in = *self.inputs[ti];
                const std::size_t block = extents[ti] * v.inner;
                if (in.requires_grad) {
                    ensure_grad(in);
                    const double* src = self.grad.data() + (o * v.len + offset) * v.inner;
                    double* dst = in.grad.data() + o * block;
                    for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                }
                offset += extents[ti];
            }
        }
    });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
    const AxisView v = axis_view(a.shape(), axis);
    if (begin > end || end > v.len) {
        throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") out of range for " + shape_str(a.shape()));
    }
    Shape out_shape = a.shape();
    out_shape[axis] = end - begin;
    std::vector<double> out((end - begin) * v.outer * v.inner);
    for (std::size_t o = 0; o < v.outer; ++o) {
        const double* src = a.values().data() + (o * v.len + begin) * v.inner;
        double* dst = out.data() + o * (end - begin) * v.inner;
        std::copy(src, src + (end - begin) * v.inner, dst);
    }
    return make_op(std::move(out_shape), std::move(out), {a}, [v, begin, end](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        for (std::size_t o = 0; o < v.outer; ++o) {
            const double* src = self.grad.data() + o * (end - begin) * v.inner;
            double* dst = in.grad.data() + (o * v.len + begin) * v.inner;
            for (std::size_t i = 0; i < (end - begin) * v.inner; ++i) dst[i] += src[i];
        }
    });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (const double x : a.values()) acc += x;
    return make_op({1}, {acc}, {a}, [](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        const double g = self.grad[0];
        for (double& gi : in.grad) gi += g;
    });
}

Tensor pick(const Tensor& a, std::size_t flat_index) {
    if (flat_index >= a.numel()) {
        throw ContractError("pick index " + std::to_string(flat_index) + " out of range for " +
                            shape_str(a.shape()));
    }
    return make_op({1}, {a.values()[flat_index]}, {a}, [flat_index](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        ensure_grad(in);
        in.grad[flat_index] += self.grad[0];
    });
}

}  // namespace magnum
