#include "magnum/midlevel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "magnum/errors.hpp"
#include "magnum/ops.hpp"

namespace magnum {

namespace {

Tensor row(const Tensor& m, size_t i) { return slice(m, 0, i, i + 1); }

// All rows except i, preserving order.
Tensor drop_row(const Tensor& m, size_t i) {
    const size_t n = m.dim(0);
    if (i == 0) return slice(m, 0, 1, n);
    if (i + 1 == n) return slice(m, 0, 0, n - 1);
    return concat({slice(m, 0, 0, i), slice(m, 0, i + 1, n)}, 0);
}

}  // namespace

SparseGraph sparsify(const Tensor& states, size_t k) {
    if (states.rank() != 2) {
        throw DimensionError("sparsify expects I x d states, got " + shape_str(states.shape()));
    }
    const size_t n = states.dim(0), d = states.dim(1);
    if (n == 0) {
        throw ContractError("sparsify requires at least one state");
    }
    if (k == 0) {
        throw ContractError("sparsify requires k >= 1");
    }
    const size_t k_eff = std::min(k, n - 1);

    std::set<std::pair<size_t, size_t>> edges;
    const auto& v = states.values();
    for (size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, size_t>> dist;
        dist.reserve(n - 1);
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (size_t c = 0; c < d; ++c) {
                const double diff = v[i * d + c] - v[j * d + c];
                d2 += diff * diff;
            }
            dist.push_back({d2, j});
        }
        std::sort(dist.begin(), dist.end());
        for (size_t t = 0; t < k_eff; ++t) {
            const size_t j = dist[t].second;
            edges.insert({std::min(i, j), std::max(i, j)});
        }
    }

    SparseGraph g;
    g.nodes = states;
    g.edges.assign(edges.begin(), edges.end());
    return g;
}

EdgePoolParams make_edge_pool(const std::string& name, size_t d, ParamRegistry& params,
                              Rng& rng) {
    EdgePoolParams p;
    p.w = params.add(name + "/w", xavier_uniform(2 * d, 1, rng, true), false);
    p.b = params.add(name + "/b", Tensor::zeros({1, 1}, true), false);
    return p;
}

CoarsenResult coarsen(const SparseGraph& g, const EdgePoolParams& p) {
    const size_t n = g.num_nodes();

    struct ScoredEdge {
        double gate;
        size_t i, j;
        Tensor s;  // 1 x 1, kept for the differentiable merge
    };
    std::vector<ScoredEdge> scored;
    scored.reserve(g.edges.size());
    for (const auto& [i, j] : g.edges) {
        if (j >= n || i >= j) {
            throw ContractError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                                ") is not canonical for " + std::to_string(n) + " nodes");
        }
        const Tensor pair = concat({row(g.nodes, i), row(g.nodes, j)}, 1);  // 1 x 2d
        const Tensor r = add(matmul(pair, p.w), p.b);                       // 1 x 1
        const Tensor s = add_scalar(sigmoid(r), 0.5);
        scored.push_back({s.at(0), i, j, s});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredEdge& a, const ScoredEdge& b) {
        if (a.gate != b.gate) return a.gate > b.gate;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    CoarsenResult out;
    std::vector<bool> matched(n, false);
    std::vector<Tensor> rows;
    for (const ScoredEdge& e : scored) {
        if (matched[e.i] || matched[e.j]) continue;
        matched[e.i] = matched[e.j] = true;
        rows.push_back(scale_by(add(row(g.nodes, e.i), row(g.nodes, e.j)), e.s));
        out.contracted.push_back({e.i, e.j, e.gate});
    }
    for (size_t i = 0; i < n; ++i) {
        if (!matched[i]) {
            out.survivors.push_back(i);
            rows.push_back(row(g.nodes, i));
        }
    }
    out.nodes = rows.size() == 1 ? rows[0] : concat(rows, 0);
    return out;
}

std::vector<CoarsenResult> coarsen_rounds(const SparseGraph& g, const EdgePoolParams& p,
                                          size_t rounds) {
    if (rounds == 0) {
        throw ContractError("coarsening needs at least one round");
    }
    std::vector<CoarsenResult> out;
    SparseGraph current = g;
    for (size_t r = 0; r < rounds; ++r) {
        CoarsenResult res = coarsen(current, p);

        if (r + 1 < rounds && !res.contracted.empty()) {
            // Map each node of this round to its coarse node, then carry an
            // edge wherever two distinct coarse nodes had adjacent members.
            const size_t n = current.num_nodes();
            std::vector<size_t> to_coarse(n);
            for (size_t c = 0; c < res.contracted.size(); ++c) {
                to_coarse[res.contracted[c].i] = c;
                to_coarse[res.contracted[c].j] = c;
            }
            for (size_t s = 0; s < res.survivors.size(); ++s) {
                to_coarse[res.survivors[s]] = res.contracted.size() + s;
            }
            std::set<std::pair<size_t, size_t>> coarse_edges;
            for (const auto& [a, b] : current.edges) {
                const size_t ca = to_coarse[a], cb = to_coarse[b];
                if (ca != cb) coarse_edges.insert({std::min(ca, cb), std::max(ca, cb)});
            }
            current.nodes = res.nodes;
            current.edges.assign(coarse_edges.begin(), coarse_edges.end());
        }

        const bool done = res.contracted.empty();
        out.push_back(std::move(res));
        if (done) break;
    }
    return out;
}

GraphAttention::GraphAttention(const std::string& name, size_t d, size_t heads,
                               ParamRegistry& params, Rng& rng)
    : d_(d) {
    if (d == 0 || heads == 0) {
        throw DimensionError("attention needs positive width and head count");
    }
    for (size_t h = 0; h < heads; ++h) {
        const std::string p = name + "/head" + std::to_string(h);
        Head head;
        head.w = params.add(p + "/w", xavier_uniform(d, d, rng, true), false);
        head.a = params.add(p + "/a", xavier_uniform(d, 1, rng, true), false);
        heads_.push_back(std::move(head));
    }
    virtual_node_ =
        params.add(name + "/virtual", rand_uniform({1, d}, -0.1, 0.1, rng, true), false);
    if (heads > 1) {
        out_ = params.add(name + "/out", xavier_uniform(heads * d, d, rng, true), false);
    }
}

Tensor GraphAttention::head_output(const Head& head, const Tensor& all, size_t i) const {
    const Tensor z = matmul(all, head.w);
    const Tensor zi = row(z, i);
    const Tensor others = drop_row(z, i);
    const Tensor scores = matmul(leaky_relu(add_rowwise(others, zi), 0.2), head.a);
    const Tensor alpha = softmax(scores, 0);
    return matmul(transpose(alpha), others);
}

Tensor GraphAttention::attend(const Tensor& nodes) const {
    if (nodes.rank() != 2 || nodes.dim(1) != d_) {
        throw DimensionError("attention input " + shape_str(nodes.shape()) +
                             " does not match width " + std::to_string(d_));
    }
    if (nodes.dim(0) == 0) {
        throw ContractError("attention needs at least one node");
    }
    const Tensor all = concat({nodes, virtual_node_}, 0);
    const size_t virtual_index = nodes.dim(0);

    std::vector<Tensor> per_head;
    for (const Head& h : heads_) {
        per_head.push_back(head_output(h, all, virtual_index));
    }
    if (per_head.size() == 1) return per_head[0];
    return matmul(concat(per_head, 1), out_);
}

Tensor GraphAttention::attention_rows(const Tensor& nodes, size_t head) const {
    if (head >= heads_.size()) {
        throw ContractError("head index out of range");
    }
    const Tensor all = concat({nodes, virtual_node_}, 0);
    const size_t n = all.dim(0);
    const Head& h = heads_[head];
    const Tensor z = matmul(all, h.w);

    std::vector<Tensor> rows;
    for (size_t i = 0; i < n; ++i) {
        const Tensor zi = row(z, i);
        const Tensor others = drop_row(z, i);
        const Tensor scores = matmul(leaky_relu(add_rowwise(others, zi), 0.2), h.a);
        const Tensor alpha = transpose(softmax(scores, 0));  // 1 x (n-1)
        const Tensor zero = Tensor::zeros({1, 1});
        if (i == 0) {
            rows.push_back(concat({zero, alpha}, 1));
        } else if (i + 1 == n) {
            rows.push_back(concat({alpha, zero}, 1));
        } else {
            rows.push_back(concat(
                {slice(alpha, 1, 0, i), zero, slice(alpha, 1, i, n - 1)}, 1));
        }
    }
    return concat(rows, 0);
}

Compressor::Compressor(const std::string& name, size_t d, size_t k, size_t rounds,
                       size_t heads, ParamRegistry& params, Rng& rng)
    : k_(k),
      rounds_(rounds),
      pool_(make_edge_pool(name + "/pool", d, params, rng)),
      attention_(name + "/att", d, heads, params, rng) {
    if (k == 0 || rounds == 0) {
        throw ContractError("compressor needs k >= 1 and rounds >= 1");
    }
}

Tensor Compressor::compress(const Tensor& states) const {
    const SparseGraph g = sparsify(states, k_);
    const auto rounds = coarsen_rounds(g, pool_, rounds_);
    return attention_.attend(rounds.back().nodes);
}

Compressor::Trace Compressor::compress_traced(const Tensor& states) const {
    Trace t;
    t.graph = sparsify(states, k_);
    t.rounds = coarsen_rounds(t.graph, pool_, rounds_);
    t.output = attention_.attend(t.rounds.back().nodes);
    return t;
}

}  // namespace magnum
