#pragma once

#include <string>
#include <utility>
#include <vector>

#include "magnum/param.hpp"
#include "magnum/tensor.hpp"

namespace magnum {

// Per-modality graph over hidden states. Edges are unordered pairs stored
// with i < j in lexicographic order; no self-loops.
struct SparseGraph {
    Tensor nodes;  // I x d
    std::vector<std::pair<size_t, size_t>> edges;

    size_t num_nodes() const { return nodes.dim(0); }
};

// k-nearest-neighbour edges under Euclidean distance, symmetric union over
// all nodes. k is clipped to I-1; distance ties prefer the lower index.
SparseGraph sparsify(const Tensor& states, size_t k);

// Learnable edge-contraction gate: raw score w . [h_i || h_j] + b.
struct EdgePoolParams {
    Tensor w;  // 2d x 1
    Tensor b;  // 1 x 1
};
EdgePoolParams make_edge_pool(const std::string& name, size_t d, ParamRegistry& params,
                              Rng& rng);

struct Contraction {
    size_t i, j;  // node indices at the start of the round, i < j
    double gate;  // s = 0.5 + sigmoid(r)
};

struct CoarsenResult {
    Tensor nodes;                        // T x d
    std::vector<Contraction> contracted; // in contraction order
    std::vector<size_t> survivors;       // pass-through input indices, ascending
};

// One round of greedy edge contraction: edges sorted by descending gate
// (ties lexicographic), an edge contracts when both ends are unmatched, the
// merged node is s * (h_i + h_j). Output rows are the merged nodes in
// contraction order followed by survivors in input order.
CoarsenResult coarsen(const SparseGraph& g, const EdgePoolParams& p);

// rounds >= 1 repeated contractions; after each round two coarse nodes are
// adjacent when any of their constituents were. Stops early once no edges
// remain. Returns one entry per executed round.
std::vector<CoarsenResult> coarsen_rounds(const SparseGraph& g, const EdgePoolParams& p,
                                          size_t rounds);

// Single attention layer over the complete loopless graph on the input
// nodes plus a learnable virtual node. Scores follow the dynamic form
// e_ij = a . LeakyReLU(W h_i + W h_j, 0.2); the updated virtual node is the
// output. Heads each own (W, a); with H > 1 the concatenated head outputs
// pass through a final linear map back to width d.
class GraphAttention {
  public:
    GraphAttention(const std::string& name, size_t d, size_t heads, ParamRegistry& params,
                   Rng& rng);

    // nodes: T x d with T >= 1. Returns 1 x d.
    Tensor attend(const Tensor& nodes) const;

    // Full attention matrix of one head over nodes + virtual node:
    // (T+1) x (T+1) with an all-zero diagonal. Row i holds alpha_ij.
    Tensor attention_rows(const Tensor& nodes, size_t head = 0) const;

    size_t heads() const { return heads_.size(); }
    size_t width() const { return d_; }

  private:
    struct Head {
        Tensor w;  // d x d
        Tensor a;  // d x 1
    };

    Tensor head_output(const Head& head, const Tensor& all, size_t row) const;

    size_t d_;
    std::vector<Head> heads_;
    Tensor virtual_node_;  // 1 x d
    Tensor out_;           // (H*d) x d, only when H > 1
};

// sparsify -> coarsen (R rounds) -> attend for one modality.
class Compressor {
  public:
    Compressor(const std::string& name, size_t d, size_t k, size_t rounds, size_t heads,
               ParamRegistry& params, Rng& rng);

    Tensor compress(const Tensor& states) const;  // I x d -> 1 x d

    struct Trace {
        SparseGraph graph;
        std::vector<CoarsenResult> rounds;
        Tensor output;
    };
    Trace compress_traced(const Tensor& states) const;

    const EdgePoolParams& pool() const { return pool_; }
    const GraphAttention& attention() const { return attention_; }
    size_t k() const { return k_; }
    size_t rounds() const { return rounds_; }

  private:
    size_t k_;
    size_t rounds_;
    EdgePoolParams pool_;
    GraphAttention attention_;
};

}  // namespace magnum
