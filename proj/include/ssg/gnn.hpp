#pragma once

#include "ssg/optim.hpp"
#include "ssg/tape.hpp"

#include <utility>
#include <vector>

namespace ssg {

struct GnnConfig {
    int d = 64;   // node feature dim
    int d_e = 128;
    int heads = 8;
    int iterations = 2;
    int bias_hidden = 8;   // distance-bias MLP hidden width
    int node_hidden = 128;
    int edge_hidden = 128;
    bool gse = true;    // distance bias added to attention logits
    bool beg = true;    // directional aggregation + reverse-edge term
    bool gating = true; // learned gate on the reverse edge (false = gate fixed to 1)
};

void init_gnn_params(ParameterStore& store, const GnnConfig& cfg, Rng& rng);

// Node features, candidate directed edges and their features, plus the
// symmetric distance matrix.
struct SceneGraphState {
    Var nodes;                               // [N, d]
    std::vector<std::pair<int, int>> pairs;  // ordered, i != j, unique
    std::vector<Var> edge_feats;             // aligned with pairs, each [d_e]
    Tensor dist;                             // [N, N]
};

// Multi-head self-attention with per-head distance-bias MLP added to the
// logits (when cfg.gse). With the bias zeroed or disabled this is exactly
// plain multi-head attention. Output projection plus residual.
Var gse_attention(Tape& tape, Var nodes, const Tensor& dist, const ParamFn& p, const GnnConfig& cfg);

// Mean of outgoing / incoming candidate edge features per node; zero vector
// for an empty side. With cfg.beg off both sides collapse to the undirected
// incident mean.
struct NodeAggregate {
    Var subj; // outgoing mean
    Var obj;  // incoming mean
};
std::vector<NodeAggregate> beg_aggregate(Tape& tape, const SceneGraphState& state, const GnnConfig& cfg);

Var beg_update_node(Tape& tape, Var node, const NodeAggregate& agg, const ParamFn& p, const GnnConfig& cfg);

// MLP(CAT(z_i, e_ij, beta * e_ji, z_j)); beta = sigmoid(linear(e_ij)).
Var beg_update_edge(Tape& tape, Var node_i, Var e_ij, Var e_ji_or_invalid, Var node_j, const ParamFn& p,
                    const GnnConfig& cfg);

// One full pass: per iteration GSE, aggregate, node updates, then synchronous
// edge updates (new nodes, old edge features on the right-hand side).
void gnn_forward(Tape& tape, SceneGraphState& state, const ParamFn& p, const GnnConfig& cfg);

} // namespace ssg
