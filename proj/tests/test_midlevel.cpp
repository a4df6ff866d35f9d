#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "magnum/errors.hpp"
#include "magnum/gradcheck.hpp"
#include "magnum/midlevel.hpp"
#include "magnum/ops.hpp"
#include "magnum/param.hpp"
#include "magnum/rng.hpp"

using namespace magnum;

namespace {

Tensor random_states(size_t n, size_t d, Rng& rng) {
    std::vector<double> v(n * d);
    for (double& x : v) x = rng.normal();
    return Tensor::from_values({n, d}, std::move(v));
}

using EdgeSet = std::set<std::pair<size_t, size_t>>;

EdgeSet to_set(const std::vector<std::pair<size_t, size_t>>& edges) {
    return EdgeSet(edges.begin(), edges.end());
}

// Independent O(I^2) nearest-neighbour reference: selection-sort style pick
// of the k closest (ties to the lower index), then symmetric union.
EdgeSet knn_oracle(const Tensor& states, size_t k) {
    const size_t n = states.dim(0), d = states.dim(1);
    const size_t k_eff = std::min(k, n - 1);
    const auto& v = states.values();
    EdgeSet edges;
    for (size_t i = 0; i < n; ++i) {
        std::vector<bool> used(n, false);
        used[i] = true;
        for (size_t pick = 0; pick < k_eff; ++pick) {
            size_t best = n;
            double best_d = 0.0;
            for (size_t j = 0; j < n; ++j) {
                if (used[j]) continue;
                double d2 = 0.0;
                for (size_t c = 0; c < d; ++c) {
                    const double diff = v[i * d + c] - v[j * d + c];
                    d2 += diff * diff;
                }
                if (best == n || d2 < best_d) {
                    best = j;
                    best_d = d2;
                }
            }
            used[best] = true;
            edges.insert({std::min(i, best), std::max(i, best)});
        }
    }
    return edges;
}

// Scalar re-computation of the edge gate.
double gate_oracle(const Tensor& nodes, const EdgePoolParams& p, size_t i, size_t j) {
    const size_t d = nodes.dim(1);
    double r = p.b.at(0);
    for (size_t c = 0; c < d; ++c) r += nodes.at(i, c) * p.w.at(c);
    for (size_t c = 0; c < d; ++c) r += nodes.at(j, c) * p.w.at(d + c);
    return 0.5 + 1.0 / (1.0 + std::exp(-r));
}

}  // namespace

TEST_CASE("three nodes with k >= 2 give the complete triangle") {
    Rng rng(3);
    const Tensor states = random_states(3, 4, rng);
    for (size_t k : {2ul, 5ul}) {
        const SparseGraph g = sparsify(states, k);
        CHECK(to_set(g.edges) == EdgeSet{{0, 1}, {0, 2}, {1, 2}});
    }
}

TEST_CASE("collinear points pair up by distance") {
    const Tensor states = Tensor::from_values({3, 1}, {0.0, 1.0, 10.0});
    const SparseGraph g = sparsify(states, 1);
    CHECK(to_set(g.edges) == EdgeSet{{0, 1}, {1, 2}});
}

TEST_CASE("a single state has no neighbours") {
    const Tensor states = Tensor::from_values({1, 4}, {1.0, 2.0, 3.0, 4.0});
    CHECK(sparsify(states, 3).edges.empty());
    CHECK_THROWS_AS(sparsify(states, 0), ContractError);
}

TEST_CASE("sparsify matches the quadratic oracle on random instances") {
    Rng rng(fnv1a("knn property"));
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 1 + rng.below(64);
        const size_t d = 1 + rng.below(6);
        const size_t k = 1 + rng.below(6);
        const Tensor states = random_states(n, d, rng);
        CHECK(to_set(sparsify(states, k).edges) == knn_oracle(states, k));
    }
}

TEST_CASE("relabeling nodes relabels edges identically") {
    Rng rng(fnv1a("knn permutation"));
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 2 + rng.below(12);
        const size_t d = 1 + rng.below(4);
        const size_t k = 1 + rng.below(4);
        const Tensor states = random_states(n, d, rng);

        std::vector<size_t> perm(n);
        for (size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);

        std::vector<double> pv(n * d);
        for (size_t i = 0; i < n; ++i)
            for (size_t c = 0; c < d; ++c) pv[perm[i] * d + c] = states.at(i, c);
        const Tensor permuted = Tensor::from_values({n, d}, std::move(pv));

        EdgeSet expected;
        for (const auto& [i, j] : sparsify(states, k).edges) {
            expected.insert({std::min(perm[i], perm[j]), std::max(perm[i], perm[j])});
        }
        CHECK(to_set(sparsify(permuted, k).edges) == expected);
    }
}

TEST_CASE("coarsening an edgeless graph is the identity") {
    Rng rng(5);
    ParamRegistry params;
    const EdgePoolParams pool = make_edge_pool("pool", 4, params, rng);
    SparseGraph g;
    g.nodes = random_states(3, 4, rng);
    const CoarsenResult res = coarsen(g, pool);
    CHECK(res.nodes.values() == g.nodes.values());
    CHECK(res.contracted.empty());
    CHECK(res.survivors == std::vector<size_t>{0, 1, 2});
}

TEST_CASE("zero parameters gate a pair merge at exactly one") {
    ParamRegistry params;
    Rng rng(6);
    EdgePoolParams pool = make_edge_pool("pool", 2, params, rng);
    for (double& v : pool.w.values_mut()) v = 0.0;

    SparseGraph g;
    g.nodes = Tensor::from_values({2, 2}, {1.0, 2.0, 3.0, 5.0});
    g.edges = {{0, 1}};
    const CoarsenResult res = coarsen(g, pool);
    REQUIRE(res.nodes.shape() == Shape{1, 2});
    CHECK(res.contracted.size() == 1);
    CHECK(res.contracted[0].gate == 1.0);
    CHECK(res.nodes.at(0, 0) == 4.0);
    CHECK(res.nodes.at(0, 1) == 7.0);
}

TEST_CASE("greedy contraction matches an independent simulation on small graphs") {
    Rng rng(fnv1a("edgepool property"));
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 2 + rng.below(7);  // up to 8 nodes
        const size_t d = 1 + rng.below(4);
        ParamRegistry params;
        const EdgePoolParams pool = make_edge_pool("pool", d, params, rng);

        SparseGraph g;
        g.nodes = random_states(n, d, rng);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                if (rng.uniform() < 0.4) g.edges.push_back({i, j});
            }
        }

        const CoarsenResult res = coarsen(g, pool);

        // Reference: repeatedly scan for the highest-gated available edge.
        std::vector<bool> matched(n, false);
        std::vector<Contraction> expected;
        std::vector<std::pair<size_t, size_t>> remaining = g.edges;
        while (true) {
            double best_gate = -1.0;
            size_t best_at = remaining.size();
            for (size_t e = 0; e < remaining.size(); ++e) {
                const auto& [i, j] = remaining[e];
                if (matched[i] || matched[j]) continue;
                const double s = gate_oracle(g.nodes, pool, i, j);
                const bool better =
                    s > best_gate ||
                    (s == best_gate && remaining[e] < remaining[best_at]);
                if (better) {
                    best_gate = s;
                    best_at = e;
                }
            }
            if (best_at == remaining.size()) break;
            const auto& [i, j] = remaining[best_at];
            matched[i] = matched[j] = true;
            expected.push_back({i, j, best_gate});
        }

        REQUIRE(res.contracted.size() == expected.size());
        for (size_t c = 0; c < expected.size(); ++c) {
            CHECK(res.contracted[c].i == expected[c].i);
            CHECK(res.contracted[c].j == expected[c].j);
            CHECK(res.contracted[c].gate == doctest::Approx(expected[c].gate).epsilon(1e-12));
        }

        // Matching property plus the compression law.
        std::set<size_t> seen;
        for (const Contraction& c : res.contracted) {
            CHECK_FALSE(seen.count(c.i));
            CHECK_FALSE(seen.count(c.j));
            seen.insert(c.i);
            seen.insert(c.j);
        }
        CHECK(res.nodes.dim(0) == n - res.contracted.size());
        if (!g.edges.empty()) CHECK(res.nodes.dim(0) < n);

        // Maximality: no remaining edge has both endpoints free.
        for (const auto& [i, j] : g.edges) {
            CHECK((matched[i] || matched[j]));
        }

        // Merged rows are s * (h_i + h_j); survivors pass through.
        for (size_t c = 0; c < res.contracted.size(); ++c) {
            const Contraction& ct = res.contracted[c];
            for (size_t col = 0; col < d; ++col) {
                const double want = ct.gate * (g.nodes.at(ct.i, col) + g.nodes.at(ct.j, col));
                CHECK(res.nodes.at(c, col) == doctest::Approx(want).epsilon(1e-12));
            }
        }
        for (size_t s = 0; s < res.survivors.size(); ++s) {
            for (size_t col = 0; col < d; ++col) {
                CHECK(res.nodes.at(res.contracted.size() + s, col) ==
                      g.nodes.at(res.survivors[s], col));
            }
        }
    }
}

TEST_CASE("repeated rounds contract a path down to one node") {
    ParamRegistry params;
    Rng rng(9);
    EdgePoolParams pool = make_edge_pool("pool", 2, params, rng);
    for (double& v : pool.w.values_mut()) v = 0.0;

    SparseGraph g;
    g.nodes = Tensor::from_values({4, 2}, {1, 0, 0, 1, 2, 0, 0, 2});
    g.edges = {{0, 1}, {1, 2}, {2, 3}};

    const auto rounds = coarsen_rounds(g, pool, 2);
    REQUIRE(rounds.size() == 2);
    CHECK(rounds[0].contracted.size() == 2);
    CHECK(rounds[0].contracted[0].i == 0);
    CHECK(rounds[0].contracted[0].j == 1);
    CHECK(rounds[0].contracted[1].i == 2);
    CHECK(rounds[0].contracted[1].j == 3);
    REQUIRE(rounds[1].contracted.size() == 1);
    REQUIRE(rounds[1].nodes.shape() == Shape{1, 2});
    // All gates are 1, so the final node is the plain sum of the four inputs.
    CHECK(rounds[1].nodes.at(0, 0) == 3.0);
    CHECK(rounds[1].nodes.at(0, 1) == 3.0);

    const auto more = coarsen_rounds(g, pool, 10);
    CHECK(more.back().nodes.dim(0) == 1);
}

TEST_CASE("a lone node attends through the virtual node to W h1") {
    ParamRegistry params;
    Rng rng(21);
    GraphAttention att("att", 4, 1, params, rng);
    Rng data_rng(22);
    const Tensor states = random_states(1, 4, data_rng);
    const Tensor out = att.attend(states);
    REQUIRE(out.shape() == Shape{1, 4});
    const Tensor expected = matmul(states, params.at("att/head0/w").tensor);
    for (size_t c = 0; c < 4; ++c) CHECK(out.at(0, c) == expected.at(0, c));

    const Tensor rows = att.attention_rows(states);
    REQUIRE(rows.shape() == Shape{2, 2});
    CHECK(rows.at(0, 1) == 1.0);
    CHECK(rows.at(1, 0) == 1.0);
    CHECK(rows.at(0, 0) == 0.0);
    CHECK(rows.at(1, 1) == 0.0);
}

TEST_CASE("attention rows always sum to one") {
    Rng rng(fnv1a("attention rows"));
    for (int trial = 0; trial < 50; ++trial) {
        const size_t t = 1 + rng.below(6);
        const size_t d = 1 + rng.below(5);
        const size_t heads = 1 + rng.below(3);
        ParamRegistry params;
        GraphAttention att("att", d, heads, params, rng);
        const Tensor states = random_states(t, d, rng);
        for (size_t h = 0; h < heads; ++h) {
            const Tensor rows = att.attention_rows(states, h);
            REQUIRE(rows.shape() == Shape{t + 1, t + 1});
            for (size_t i = 0; i < t + 1; ++i) {
                double total = 0.0;
                for (size_t j = 0; j < t + 1; ++j) total += rows.at(i, j);
                CHECK(std::abs(total - 1.0) <= 1e-12);
                CHECK(rows.at(i, i) == 0.0);
            }
        }
    }
}

TEST_CASE("two-node attention matches a scalar recomputation") {
    ParamRegistry params;
    Rng rng(31);
    GraphAttention att("att", 2, 1, params, rng);
    auto& w = params.at("att/head0/w").tensor.values_mut();
    w = {0.5, -1.0, 0.25, 2.0};
    auto& a = params.at("att/head0/a").tensor.values_mut();
    a = {1.0, -0.5};
    auto& vn = params.at("att/virtual").tensor.values_mut();
    vn = {0.5, -0.25};

    const Tensor states = Tensor::from_values({2, 2}, {1.0, 0.0, 0.0, 1.0});
    const Tensor out = att.attend(states);

    // By hand: z_i = h_i W (rows), e_j = a . lrelu(z_virtual + z_j),
    // softmax over the two real nodes, then the alpha-weighted sum of z_j.
    auto zrow = [&](double x0, double x1) {
        return std::array<double, 2>{x0 * 0.5 + x1 * 0.25, x0 * -1.0 + x1 * 2.0};
    };
    const auto z0 = zrow(1.0, 0.0);
    const auto z1 = zrow(0.0, 1.0);
    const auto zv = zrow(0.5, -0.25);
    auto lrelu = [](double x) { return x > 0.0 ? x : 0.2 * x; };
    auto score = [&](const std::array<double, 2>& zj) {
        return 1.0 * lrelu(zv[0] + zj[0]) + -0.5 * lrelu(zv[1] + zj[1]);
    };
    const double e0 = score(z0), e1 = score(z1);
    const double m = std::max(e0, e1);
    const double w0 = std::exp(e0 - m), w1 = std::exp(e1 - m);
    const double a0 = w0 / (w0 + w1), a1 = w1 / (w0 + w1);
    CHECK(out.at(0, 0) == doctest::Approx(a0 * z0[0] + a1 * z1[0]).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(a0 * z0[1] + a1 * z1[1]).epsilon(1e-12));
}

TEST_CASE("compression returns one common-width vector regardless of input size") {
    Rng rng(41);
    for (size_t n : {1ul, 2ul, 5ul, 9ul}) {
        ParamRegistry params;
        Rng init(42);
        Compressor comp("m", 6, 3, 1, 1, params, init);
        const Tensor states = random_states(n, 6, rng);
        const Tensor out = comp.compress(states);
        CHECK(out.shape() == Shape{1, 6});

        const auto trace = comp.compress_traced(states);
        CHECK(trace.output.values() == out.values());
        size_t contracted = 0;
        for (const auto& r : trace.rounds) contracted += r.contracted.size();
        CHECK(trace.rounds.back().nodes.dim(0) == n - contracted);
        if (!trace.graph.edges.empty()) CHECK(trace.rounds.back().nodes.dim(0) < n);
    }
}

TEST_CASE("single-state compression reduces to the attention transform") {
    ParamRegistry params;
    Rng rng(51);
    Compressor comp("m", 4, 4, 1, 1, params, rng);
    Rng data_rng(52);
    const Tensor states = random_states(1, 4, data_rng);
    const Tensor out = comp.compress(states);
    const Tensor expected = matmul(states, params.at("m/att/head0/w").tensor);
    for (size_t c = 0; c < 4; ++c) CHECK(out.at(0, c) == expected.at(0, c));
}

TEST_CASE("compression gradients match finite differences") {
    ParamRegistry params;
    Rng rng(61);
    Compressor comp("m", 6, 2, 1, 1, params, rng);
    Rng data_rng(62);
    const Tensor states = random_states(5, 6, data_rng);

    auto loss = [&] { return sum(mul(comp.compress(states), comp.compress(states))); };
    auto trainable = params.trainable();
    const GradCheckReport report = grad_check(loss, trainable, 1e-5);
    CHECK(report.max_rel_error < 1e-6);
    CHECK(report.entries_checked > 0);
}

TEST_CASE("compression with two heads and two rounds stays well-formed") {
    ParamRegistry params;
    Rng rng(71);
    Compressor comp("m", 6, 2, 2, 2, params, rng);
    Rng data_rng(72);
    const Tensor states = random_states(7, 6, data_rng);
    const Tensor out = comp.compress(states);
    REQUIRE(out.shape() == Shape{1, 6});
    for (double v : out.values()) CHECK(std::isfinite(v));

    auto trainable = params.trainable();
    auto loss = [&] { return sum(mul(comp.compress(states), comp.compress(states))); };
    const GradCheckReport report = grad_check(loss, trainable, 1e-5);
    CHECK(report.max_rel_error < 1e-6);
}
