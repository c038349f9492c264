#include "ssg/gnn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ssg {

void init_gnn_params(ParameterStore& store, const GnnConfig& cfg, Rng& rng) {
    if (cfg.d % cfg.heads != 0) throw std::invalid_argument("gnn: d must be divisible by heads");
    const int dk = cfg.d / cfg.heads;
    for (int h = 0; h < cfg.heads; ++h) {
        const std::string base = "gnn.gse.h" + std::to_string(h);
        store.add(base + ".wq", glorot_uniform({cfg.d, dk}, cfg.d, dk, rng));
        store.add(base + ".wk", glorot_uniform({cfg.d, dk}, cfg.d, dk, rng));
        store.add(base + ".wv", glorot_uniform({cfg.d, dk}, cfg.d, dk, rng));
        store.add(base + ".bias.w1", glorot_uniform({1, cfg.bias_hidden}, 1, cfg.bias_hidden, rng));
        store.add(base + ".bias.b1", Tensor({cfg.bias_hidden}, 0.0));
        store.add(base + ".bias.w2", glorot_uniform({cfg.bias_hidden, 1}, cfg.bias_hidden, 1, rng));
        store.add(base + ".bias.b2", Tensor({1}, 0.0));
    }
    store.add("gnn.gse.wo", glorot_uniform({cfg.d, cfg.d}, cfg.d, cfg.d, rng));
    store.add("gnn.gse.bo", Tensor({cfg.d}, 0.0));

    store.add("gnn.beg.wdir", glorot_uniform({2 * cfg.d_e, cfg.d}, 2 * cfg.d_e, cfg.d, rng));
    store.add("gnn.beg.node.w1", glorot_uniform({2 * cfg.d, cfg.node_hidden}, 2 * cfg.d, cfg.node_hidden, rng));
    store.add("gnn.beg.node.b1", Tensor({cfg.node_hidden}, 0.0));
    store.add("gnn.beg.node.w2", glorot_uniform({cfg.node_hidden, cfg.d}, cfg.node_hidden, cfg.d, rng));
    store.add("gnn.beg.node.b2", Tensor({cfg.d}, 0.0));
    store.add("gnn.beg.ln.gamma", Tensor({cfg.d}, 1.0));
    store.add("gnn.beg.ln.beta", Tensor({cfg.d}, 0.0));
    const int edge_in = 2 * cfg.d + 2 * cfg.d_e;
    store.add("gnn.beg.edge.w1", glorot_uniform({edge_in, cfg.edge_hidden}, edge_in, cfg.edge_hidden, rng));
    store.add("gnn.beg.edge.b1", Tensor({cfg.edge_hidden}, 0.0));
    store.add("gnn.beg.edge.w2", glorot_uniform({cfg.edge_hidden, cfg.d_e}, cfg.edge_hidden, cfg.d_e, rng));
    store.add("gnn.beg.edge.b2", Tensor({cfg.d_e}, 0.0));
    store.add("gnn.beg.gate.w", glorot_uniform({cfg.d_e, 1}, cfg.d_e, 1, rng));
    store.add("gnn.beg.gate.b", Tensor({1}, 0.0));
}

Var gse_attention(Tape& tape, Var nodes, const Tensor& dist, const ParamFn& p, const GnnConfig& cfg) {
    const int n = tape.val(nodes).rows();
    if (dist.rank() != 2 || dist.rows() != n || dist.cols() != n)
        throw std::invalid_argument("gse_attention: distance matrix must be NxN");
    const int dk = cfg.d / cfg.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Var dist_col; // [N*N, 1], built lazily
    std::vector<Var> head_outs;
    for (int h = 0; h < cfg.heads; ++h) {
        const std::string base = "gnn.gse.h" + std::to_string(h);
        Var q = tape.linear(nodes, p(base + ".wq"), Var{});
        Var k = tape.linear(nodes, p(base + ".wk"), Var{});
        Var v = tape.linear(nodes, p(base + ".wv"), Var{});
        Var logits = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dk);
        if (cfg.gse) {
            if (!dist_col.valid()) {
                Tensor dc({n * n, 1});
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) dc.at(i * n + j, 0) = dist.at(i, j);
                dist_col = tape.constant(std::move(dc));
            }
            Var hmid = tape.relu(tape.linear(dist_col, p(base + ".bias.w1"), p(base + ".bias.b1")));
            Var w = tape.linear(hmid, p(base + ".bias.w2"), p(base + ".bias.b2"));
            logits = tape.add(logits, tape.reshape(w, {n, n}));
        }
        Var alpha = tape.softmax(logits, 1);
        head_outs.push_back(tape.matmul(alpha, v));
    }
    Var cat = cfg.heads == 1 ? head_outs[0] : tape.concat(head_outs, 1);
    Var proj = tape.linear(cat, p("gnn.gse.wo"), p("gnn.gse.bo"));
    return tape.add(nodes, proj);
}

std::vector<NodeAggregate> beg_aggregate(Tape& tape, const SceneGraphState& state, const GnnConfig& cfg) {
    const int n = tape.val(state.nodes).rows();
    const int d_e = cfg.d_e;
    std::vector<std::vector<Var>> outgoing(static_cast<std::size_t>(n));
    std::vector<std::vector<Var>> incoming(static_cast<std::size_t>(n));
    for (std::size_t e = 0; e < state.pairs.size(); ++e) {
        const auto [i, j] = state.pairs[e];
        outgoing[static_cast<std::size_t>(i)].push_back(state.edge_feats[e]);
        incoming[static_cast<std::size_t>(j)].push_back(state.edge_feats[e]);
    }
    Var zero = tape.constant(Tensor({d_e}, 0.0));
    auto mean_feats = [&](const std::vector<Var>& feats) -> Var {
        if (feats.empty()) return zero;
        if (feats.size() == 1) return feats[0];
        return tape.mean_axis0(tape.stack_rows(feats));
    };
    std::vector<NodeAggregate> agg;
    agg.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& out_e = outgoing[static_cast<std::size_t>(i)];
        auto& in_e = incoming[static_cast<std::size_t>(i)];
        if (cfg.beg) {
            agg.push_back({mean_feats(out_e), mean_feats(in_e)});
        } else {
            // direction-blind variant: undirected incident mean on both slots
            std::vector<Var> all = out_e;
            all.insert(all.end(), in_e.begin(), in_e.end());
            Var m = mean_feats(all);
            agg.push_back({m, m});
        }
    }
    return agg;
}

Var beg_update_node(Tape& tape, Var node, const NodeAggregate& agg, const ParamFn& p, const GnnConfig& cfg) {
    Var dir = tape.relu(tape.linear(tape.concat({agg.subj, agg.obj}, 0), p("gnn.beg.wdir"), Var{}));
    Var x = tape.concat({node, dir}, 0);
    Var h = tape.relu(tape.linear(x, p("gnn.beg.node.w1"), p("gnn.beg.node.b1")));
    Var y = tape.linear(h, p("gnn.beg.node.w2"), p("gnn.beg.node.b2"));
    return tape.layer_norm(y, p("gnn.beg.ln.gamma"), p("gnn.beg.ln.beta"));
}

Var beg_update_edge(Tape& tape, Var node_i, Var e_ij, Var e_ji_or_invalid, Var node_j, const ParamFn& p,
                    const GnnConfig& cfg) {
    Var reverse;
    if (!cfg.beg || !e_ji_or_invalid.valid()) {
        reverse = tape.constant(Tensor({cfg.d_e}, 0.0));
    } else if (cfg.gating) {
        Var beta = tape.sigmoid(tape.pick(tape.linear(e_ij, p("gnn.beg.gate.w"), p("gnn.beg.gate.b")), 0));
        reverse = tape.smul(beta, e_ji_or_invalid);
    } else {
        reverse = e_ji_or_invalid; // gate fixed to 1
    }
    Var x = tape.concat({node_i, e_ij, reverse, node_j}, 0);
    Var h = tape.relu(tape.linear(x, p("gnn.beg.edge.w1"), p("gnn.beg.edge.b1")));
    return tape.linear(h, p("gnn.beg.edge.w2"), p("gnn.beg.edge.b2"));
}

void gnn_forward(Tape& tape, SceneGraphState& state, const ParamFn& p, const GnnConfig& cfg) {
    if (cfg.iterations < 1) throw std::invalid_argument("gnn_forward: iterations >= 1 required");
    const int n = tape.val(state.nodes).rows();
    // reverse-pair index, fixed across iterations
    std::vector<int> rev(state.pairs.size(), -1);
    {
        std::vector<std::vector<int>> at(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), -1));
        for (std::size_t e = 0; e < state.pairs.size(); ++e)
            at[static_cast<std::size_t>(state.pairs[e].first)][static_cast<std::size_t>(state.pairs[e].second)] =
                static_cast<int>(e);
        for (std::size_t e = 0; e < state.pairs.size(); ++e)
            rev[e] = at[static_cast<std::size_t>(state.pairs[e].second)][static_cast<std::size_t>(state.pairs[e].first)];
    }
    for (int it = 0; it < cfg.iterations; ++it) {
        state.nodes = gse_attention(tape, state.nodes, state.dist, p, cfg);
        auto agg = beg_aggregate(tape, state, cfg);
        std::vector<Var> new_nodes;
        new_nodes.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            new_nodes.push_back(beg_update_node(tape, tape.row(state.nodes, i), agg[static_cast<std::size_t>(i)], p, cfg));
        state.nodes = tape.stack_rows(new_nodes);
        std::vector<Var> new_edges;
        new_edges.reserve(state.pairs.size());
        for (std::size_t e = 0; e < state.pairs.size(); ++e) {
            const auto [i, j] = state.pairs[e];
            Var e_ji = rev[e] >= 0 ? state.edge_feats[static_cast<std::size_t>(rev[e])] : Var{};
            new_edges.push_back(beg_update_edge(tape, tape.row(state.nodes, i), state.edge_feats[e], e_ji,
                                                tape.row(state.nodes, j), p, cfg));
        }
        state.edge_feats = std::move(new_edges);
    }
}

} // namespace ssg
