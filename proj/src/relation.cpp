#include "ssg/relation.hpp"

#include <stdexcept>

namespace ssg {

void init_relation_params(ParameterStore& store, const RelationConfig& cfg, Rng& rng) {
    auto lin = [&](const std::string& base, int in, int out) {
        store.add(base + ".w", glorot_uniform({in, out}, in, out, rng));
        store.add(base + ".b", Tensor({out}, 0.0));
    };
    lin("rel.gobj.l1", cfg.d, cfg.obj_proj);
    lin("rel.gobj.l2", cfg.obj_proj, cfg.obj_proj);
    lin("rel.ggeo.l1", 11, cfg.geo_proj);
    lin("rel.ggeo.l2", cfg.geo_proj, cfg.geo_proj);
    lin("rel.fr.l1", 2 * cfg.obj_proj + cfg.geo_proj, cfg.fr_hidden);
    lin("rel.fr.l2", cfg.fr_hidden, cfg.d_e);
    // conv starts as the delta kernel (identity on any sequence)
    Tensor k({5}, 0.0);
    k.at(2) = 1.0;
    store.add("rel.fr.conv.k", std::move(k));
    store.add("rel.fr.conv.b", Tensor({1}, 0.0));
    lin("rel.lse.l1", cfg.d_e, cfg.lse_hidden);
    lin("rel.lse.l2", cfg.lse_hidden, 11);
}

namespace {
Var mlp2(Tape& t, Var x, const ParamFn& p, const std::string& base) {
    Var h = t.relu(t.linear(x, p(base + ".l1.w"), p(base + ".l1.b")));
    return t.linear(h, p(base + ".l2.w"), p(base + ".l2.b"));
}
} // namespace

Var init_edge_feature(Tape& tape, Var z_i, Var z_j, Var g_ij, const ParamFn& p, const RelationConfig& cfg) {
    if (tape.val(g_ij).numel() != 11) throw std::invalid_argument("init_edge_feature: descriptor must be 11-dim");
    Var pi = mlp2(tape, z_i, p, "rel.gobj");
    Var pj = mlp2(tape, z_j, p, "rel.gobj");
    Var pg = mlp2(tape, g_ij, p, "rel.ggeo");
    Var cat = tape.concat({pi, pj, pg}, 0);
    Var h = tape.relu(tape.linear(cat, p("rel.fr.l1.w"), p("rel.fr.l1.b")));
    Var pre = tape.linear(h, p("rel.fr.l2.w"), p("rel.fr.l2.b"));
    return tape.conv1d_k5(pre, p("rel.fr.conv.k"), p("rel.fr.conv.b"));
}

Var lse_reconstruct(Tape& tape, Var z_e, const ParamFn& p, const RelationConfig& cfg) {
    return mlp2(tape, z_e, p, "rel.lse");
}

Var lse_loss(Tape& tape, Var pred, const Tensor& g_ij) {
    return tape.l1_loss(pred, tape.constant(g_ij));
}

} // namespace ssg
