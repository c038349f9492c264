#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ssg/gnn.hpp"
#include "ssg/gradcheck.hpp"

#include "test_util.hpp"

#include <cmath>
#include <cstring>

using namespace ssg;
using ssgtest::random_tensor;

namespace {

GnnConfig small_cfg() {
    GnnConfig gc;
    gc.d = 8;
    gc.d_e = 12;
    gc.heads = 2;
    gc.iterations = 1;
    gc.bias_hidden = 4;
    gc.node_hidden = 16;
    gc.edge_hidden = 16;
    return gc;
}

Tensor random_dist(int n, Rng& rng) {
    Tensor d({n, n}, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = std::abs(rng.normal()) + 0.1;
            d.at(i, j) = v;
            d.at(j, i) = v;
        }
    return d;
}

SceneGraphState random_state(Tape& tape, const GnnConfig& gc, int n, Rng& rng, bool full_pairs = true) {
    SceneGraphState st;
    st.nodes = tape.leaf(random_tensor({n, gc.d}, rng));
    st.dist = random_dist(n, rng);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (!full_pairs && ((i + j) % 3 == 0)) continue;
            st.pairs.emplace_back(i, j);
            st.edge_feats.push_back(tape.leaf(random_tensor({gc.d_e}, rng)));
        }
    return st;
}

bool bit_identical(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("zeroed distance bias is bit-identical to plain attention") {
    GnnConfig gc = small_cfg();
    ParameterStore store;
    Rng rng(3);
    init_gnn_params(store, gc, rng);
    for (int h = 0; h < gc.heads; ++h) {
        const std::string base = "gnn.gse.h" + std::to_string(h) + ".bias.";
        for (const char* part : {"w1", "b1", "w2", "b2"})
            for (double& v : store.at(base + part).value.data) v = 0.0;
    }
    Rng drng(7);
    Tensor nodes = random_tensor({5, gc.d}, drng);
    Tensor dist = random_dist(5, drng);

    Tape t1;
    GnnConfig with_bias = gc;
    with_bias.gse = true;
    Var o1 = gse_attention(t1, t1.constant(nodes), dist, const_params(t1, store), with_bias);

    Tape t2;
    GnnConfig plain = gc;
    plain.gse = false;
    Var o2 = gse_attention(t2, t2.constant(nodes), dist, const_params(t2, store), plain);

    CHECK(bit_identical(t1.val(o1), t2.val(o2)));
}

TEST_CASE("single-node attention collapses to the value path plus residual") {
    GnnConfig gc = small_cfg();
    ParameterStore store;
    Rng rng(11);
    init_gnn_params(store, gc, rng);
    Rng drng(5);
    Tensor nodes = random_tensor({1, gc.d}, drng);
    Tensor dist({1, 1}, 0.0);

    Tape tape;
    auto getp = const_params(tape, store);
    Var out = gse_attention(tape, tape.constant(nodes), dist, getp, gc);

    // alpha_11 = 1: attention output equals W_o applied to per-head values
    std::vector<Var> heads;
    Var nv = tape.constant(nodes);
    for (int h = 0; h < gc.heads; ++h)
        heads.push_back(tape.linear(nv, getp("gnn.gse.h" + std::to_string(h) + ".wv"), Var{}));
    Var cat = tape.concat(heads, 1);
    Var expect = tape.add(nv, tape.linear(cat, getp("gnn.gse.wo"), getp("gnn.gse.bo")));
    CHECK(ssgtest::max_abs_diff(tape.val(out), tape.val(expect)) < 1e-12);
}

TEST_CASE("attention rows sum to one") {
    // exercised through softmax: verify by reconstructing logits by hand
    GnnConfig gc = small_cfg();
    ParameterStore store;
    Rng rng(13);
    init_gnn_params(store, gc, rng);
    Rng drng(17);
    Tensor nodes = random_tensor({6, gc.d}, drng);
    Tensor dist = random_dist(6, drng);
    Tape tape;
    auto getp = const_params(tape, store);
    Var q = tape.linear(tape.constant(nodes), getp("gnn.gse.h0.wq"), Var{});
    Var k = tape.linear(tape.constant(nodes), getp("gnn.gse.h0.wk"), Var{});
    Var logits = tape.scale(tape.matmul(q, tape.transpose(k)), 1.0 / std::sqrt(4.0));
    Var alpha = tape.softmax(logits, 1);
    for (int i = 0; i < 6; ++i) {
        double row = 0.0;
        for (int j = 0; j < 6; ++j) row += tape.val(alpha).at(i, j);
        CHECK(std::abs(row - 1.0) < 1e-9);
    }
}

TEST_CASE("beg aggregation equals a brute-force mean, with zero for empty sides") {
    GnnConfig gc = small_cfg();
    Rng rng(23);
    Tape tape;
    // node 0 -> 1, 0 -> 2, 1 -> 0; node 3 isolated
    SceneGraphState st;
    st.nodes = tape.leaf(random_tensor({4, gc.d}, rng));
    st.dist = random_dist(4, rng);
    st.pairs = {{0, 1}, {0, 2}, {1, 0}};
    for (int e = 0; e < 3; ++e) st.edge_feats.push_back(tape.leaf(random_tensor({gc.d_e}, rng)));

    auto agg = beg_aggregate(tape, st, gc);
    // node 0 outgoing mean of edges 0,1
    for (int j = 0; j < gc.d_e; ++j) {
        const double expect = 0.5 * (tape.val(st.edge_feats[0]).at(j) + tape.val(st.edge_feats[1]).at(j));
        CHECK(tape.val(agg[0].subj).at(j) == doctest::Approx(expect).epsilon(1e-12));
    }
    // node 1: single outgoing edge (exact), single incoming edge
    CHECK(ssgtest::max_abs_diff(tape.val(agg[1].subj), tape.val(st.edge_feats[2])) == 0.0);
    CHECK(ssgtest::max_abs_diff(tape.val(agg[1].obj), tape.val(st.edge_feats[0])) == 0.0);
    // isolated node: zeros on both sides
    for (int j = 0; j < gc.d_e; ++j) {
        CHECK(tape.val(agg[3].subj).at(j) == 0.0);
        CHECK(tape.val(agg[3].obj).at(j) == 0.0);
    }

    // random graphs vs brute force
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng r2(seed);
        Tape t2;
        SceneGraphState s2 = random_state(t2, gc, 5, r2, false);
        auto a2 = beg_aggregate(t2, s2, gc);
        for (int node = 0; node < 5; ++node) {
            Tensor sum_out({gc.d_e}, 0.0), sum_in({gc.d_e}, 0.0);
            int n_out = 0, n_in = 0;
            for (std::size_t e = 0; e < s2.pairs.size(); ++e) {
                if (s2.pairs[e].first == node) {
                    for (int j = 0; j < gc.d_e; ++j) sum_out.at(j) += t2.val(s2.edge_feats[e]).at(j);
                    ++n_out;
                }
                if (s2.pairs[e].second == node) {
                    for (int j = 0; j < gc.d_e; ++j) sum_in.at(j) += t2.val(s2.edge_feats[e]).at(j);
                    ++n_in;
                }
            }
            for (int j = 0; j < gc.d_e; ++j) {
                const double eo = n_out ? sum_out.at(j) / n_out : 0.0;
                const double ei = n_in ? sum_in.at(j) / n_in : 0.0;
                CHECK(std::abs(t2.val(a2[static_cast<std::size_t>(node)].subj).at(j) - eo) < 1e-12);
                CHECK(std::abs(t2.val(a2[static_cast<std::size_t>(node)].obj).at(j) - ei) < 1e-12);
            }
        }
    }
}

TEST_CASE("node update output is LayerNormed with fresh gamma/beta") {
    GnnConfig gc = small_cfg();
    ParameterStore store;
    Rng rng(41);
    init_gnn_params(store, gc, rng);
    Tape tape;
    Rng drng(2);
    auto getp = const_params(tape, store);
    NodeAggregate agg{tape.constant(random_tensor({gc.d_e}, drng)), tape.constant(random_tensor({gc.d_e}, drng))};
    Var out = beg_update_node(tape, tape.constant(random_tensor({gc.d}, drng)), agg, getp, gc);
    double mean = 0.0, var = 0.0;
    for (double v : tape.val(out).data) mean += v;
    mean /= gc.d;
    for (double v : tape.val(out).data) var += (v - mean) * (v - mean);
    var /= gc.d;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3)); // gamma starts at 1, beta at 0
}

TEST_CASE("gate scalar lives in (0,1); saturated-off gate ignores the reverse edge") {
    GnnConfig gc = small_cfg();
    ParameterStore store;
    Rng rng(55);
    init_gnn_params(store, gc, rng);
    Rng drng(6);
    Tensor ni = random_tensor({gc.d}, drng), nj = random_tensor({gc.d}, drng);
    Tensor eij = random_tensor({gc.d_e}, drng), eji = random_tensor({gc.d_e}, drng);
    Tensor eji2 = eji;
    eji2.at(3) += 10.0;

    // force beta -> 0 through a huge negative gate bias
    store.at("gnn.beg.gate.b").value.at(0) = -1e4;
    Tape t1, t2;
    Var o1 = beg_update_edge(t1, t1.constant(ni), t1.constant(eij), t1.constant(eji), t1.constant(nj),
                             const_params(t1, store), gc);
    Var o2 = beg_update_edge(t2, t2.constant(ni), t2.constant(eij), t2.constant(eji2), t2.constant(nj),
                             const_params(t2, store), gc);
    CHECK(ssgtest::max_abs_diff(t1.val(o1), t2.val(o2)) < 1e-9);

    // moderate gate: beta strictly inside (0,1), reverse edge matters
    store.at("gnn.beg.gate.b").value.at(0) = 0.3;
    Tape t3;
    auto getp = const_params(t3, store);
    Var lin = t3.linear(t3.constant(eij), getp("gnn.beg.gate.w"), getp("gnn.beg.gate.b"));
    const double beta = 1.0 / (1.0 + std::exp(-t3.val(lin).at(0)));
    CHECK(beta > 0.0);
    CHECK(beta < 1.0);

    Tape t4, t5;
    Var o4 = beg_update_edge(t4, t4.constant(ni), t4.constant(eij), t4.constant(eji), t4.constant(nj),
                             const_params(t4, store), gc);
    Var o5 = beg_update_edge(t5, t5.constant(ni), t5.constant(eij), t5.constant(eji2), t5.constant(nj),
                             const_params(t5, store), gc);
    CHECK(ssgtest::max_abs_diff(t4.val(o4), t5.val(o5)) > 1e-6);
}

TEST_CASE("gating off reproduces the ungated bidirectional update") {
    GnnConfig gc = small_cfg();
    ParameterStore store;
    Rng rng(67);
    init_gnn_params(store, gc, rng);
    Rng drng(9);
    Tensor ni = random_tensor({gc.d}, drng), nj = random_tensor({gc.d}, drng);
    Tensor eij = random_tensor({gc.d_e}, drng), eji = random_tensor({gc.d_e}, drng);

    GnnConfig ungated = gc;
    ungated.gating = false;
    Tape t1;
    Var got = beg_update_edge(t1, t1.constant(ni), t1.constant(eij), t1.constant(eji), t1.constant(nj),
                              const_params(t1, store), ungated);
    // hand-build MLP(CAT(z_i, e_ij, 1 * e_ji, z_j))
    Tape t2;
    auto getp = const_params(t2, store);
    Var cat = t2.concat({t2.constant(ni), t2.constant(eij), t2.constant(eji), t2.constant(nj)}, 0);
    Var h = t2.relu(t2.linear(cat, getp("gnn.beg.edge.w1"), getp("gnn.beg.edge.b1")));
    Var expect = t2.linear(h, getp("gnn.beg.edge.w2"), getp("gnn.beg.edge.b2"));
    CHECK(bit_identical(t1.val(got), t2.val(expect)));
}

TEST_CASE("one vs two iterations differ; forward is permutation-equivariant") {
    GnnConfig gc = small_cfg();
    ParameterStore store;
    Rng rng(71);
    init_gnn_params(store, gc, rng);

    Rng drng(1);
    Tensor nodes = random_tensor({4, gc.d}, drng);
    Tensor dist = random_dist(4, drng);
    std::vector<Tensor> feats;
    for (int e = 0; e < 12; ++e) feats.push_back(random_tensor({gc.d_e}, drng));

    auto run = [&](int iterations, const std::vector<int>& perm) {
        Tape tape;
        GnnConfig cfg = gc;
        cfg.iterations = iterations;
        SceneGraphState st;
        Tensor pn({4, gc.d});
        Tensor pd({4, 4});
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < gc.d; ++j) pn.at(i, j) = nodes.at(perm[static_cast<std::size_t>(i)], j);
            for (int j = 0; j < 4; ++j) pd.at(i, j) = dist.at(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
        }
        st.nodes = tape.constant(pn);
        st.dist = pd;
        int e = 0;
        // edges enumerated in the ORIGINAL id order so features follow nodes
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                if (i == j) continue;
                // position of original nodes i, j in the permuted scene
                int pi = -1, pj = -1;
                for (int k = 0; k < 4; ++k) {
                    if (perm[static_cast<std::size_t>(k)] == i) pi = k;
                    if (perm[static_cast<std::size_t>(k)] == j) pj = k;
                }
                st.pairs.emplace_back(pi, pj);
                st.edge_feats.push_back(tape.constant(feats[static_cast<std::size_t>(e++)]));
            }
        gnn_forward(tape, st, const_params(tape, store), cfg);
        Tensor out_nodes = tape.val(st.nodes);
        // un-permute rows for comparison
        Tensor restored({4, gc.d});
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < gc.d; ++j) restored.at(perm[static_cast<std::size_t>(i)], j) = out_nodes.at(i, j);
        return restored;
    };

    const std::vector<int> ident = {0, 1, 2, 3};
    const Tensor once = run(1, ident);
    const Tensor twice = run(2, ident);
    CHECK(ssgtest::max_abs_diff(once, twice) > 1e-8);

    const Tensor permuted = run(1, {2, 0, 3, 1});
    CHECK(ssgtest::max_abs_diff(once, permuted) < 1e-9);
}

TEST_CASE("full gnn forward passes finite differences") {
    GnnConfig gc = small_cfg();
    ParameterStore store;
    Rng rng(83);
    init_gnn_params(store, gc, rng);
    Rng drng(4);
    Tensor nodes = random_tensor({3, gc.d}, drng);
    Tensor dist = random_dist(3, drng);
    std::vector<Tensor> feats;
    for (int e = 0; e < 6; ++e) feats.push_back(random_tensor({gc.d_e}, drng));

    auto res = finite_diff_check(
        [&](Tape& tape, TapeBinding& bind) {
            SceneGraphState st;
            st.nodes = tape.constant(nodes);
            st.dist = dist;
            int e = 0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    if (i == j) continue;
                    st.pairs.emplace_back(i, j);
                    st.edge_feats.push_back(tape.constant(feats[static_cast<std::size_t>(e++)]));
                }
            gnn_forward(tape, st, bind_params(bind), gc);
            Var acc = tape.sumsq(st.nodes);
            for (const Var& ef : st.edge_feats) acc = tape.add(acc, tape.sumsq(ef));
            return acc;
        },
        store);
    CHECK(res.max_rel_error < 1e-4);
}
