#include "ssg/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssg {

EncoderConfig ModelConfig::encoder() const {
    EncoderConfig c;
    c.d = d;
    c.enc_h1 = d;
    c.enc_h2 = 2 * d;
    return c;
}

RelationConfig ModelConfig::relation() const {
    RelationConfig c;
    c.d = d;
    c.d_e = d_e;
    return c;
}

GnnConfig ModelConfig::gnn() const {
    GnnConfig c;
    c.d = d;
    c.d_e = d_e;
    c.heads = heads;
    c.iterations = iterations;
    c.gse = gse;
    c.beg = beg;
    c.gating = gating;
    return c;
}

void init_graph_params(ParameterStore& store, const ModelConfig& cfg, Rng& rng) {
    init_relation_params(store, cfg.relation(), rng);
    init_gnn_params(store, cfg.gnn(), rng);
    store.add("head.obj.w", glorot_uniform({cfg.d, cfg.n_obj}, cfg.d, cfg.n_obj, rng));
    store.add("head.obj.b", Tensor({cfg.n_obj}, 0.0));
    store.add("head.pred.w", glorot_uniform({cfg.d_e, cfg.n_pred}, cfg.d_e, cfg.n_pred, rng));
    store.add("head.pred.b", Tensor({cfg.n_pred}, 0.0));
}

SceneTensors prepare_scene(const Scene& scene, const ModelConfig& cfg) {
    SceneTensors st;
    const int n = static_cast<int>(scene.instances.size());
    for (const auto& inst : scene.instances) {
        st.stats.push_back(compute_instance_stats(inst.points));
        st.labels.push_back(inst.label);
        if (inst.label < 0 || inst.label >= cfg.n_obj) throw std::invalid_argument("scene label out of model range");
    }
    st.dist = distance_matrix(st.stats);
    for (int i = 0; i < n && static_cast<int>(st.pairs.size()) < cfg.max_pairs; ++i)
        for (int j = 0; j < n && static_cast<int>(st.pairs.size()) < cfg.max_pairs; ++j) {
            if (i == j) continue;
            st.pairs.emplace_back(i, j);
            st.geo.push_back(geometric_descriptor(st.stats[static_cast<std::size_t>(i)],
                                                  st.stats[static_cast<std::size_t>(j)]));
        }
    st.pred_targets = Tensor({static_cast<int>(st.pairs.size()), cfg.n_pred}, 0.0);
    for (const auto& e : scene.edges) {
        const int i = scene.index_of(e.sub);
        const int j = scene.index_of(e.obj);
        for (std::size_t k = 0; k < st.pairs.size(); ++k) {
            if (st.pairs[k] == std::make_pair(i, j)) {
                for (int p : e.preds) {
                    if (p < 0 || p >= cfg.n_pred) throw std::invalid_argument("scene predicate out of model range");
                    st.pred_targets.at(static_cast<int>(k), p) = 1.0;
                }
                break;
            }
        }
    }
    return st;
}

SceneForward scene_forward(Tape& tape, const SceneTensors& st, const EmbeddingSource& emb, const ParamFn& p,
                           const ModelConfig& cfg) {
    const int n = static_cast<int>(st.labels.size());
    SceneForward fwd;
    std::vector<Var> embeddings;
    if (emb.cached) {
        if (static_cast<int>(emb.cached->size()) != n) throw std::invalid_argument("cached embedding count mismatch");
        for (const Tensor& e : *emb.cached) embeddings.push_back(tape.constant(e));
    } else if (emb.points) {
        if (static_cast<int>(emb.points->size()) != n) throw std::invalid_argument("point cloud count mismatch");
        const EncoderConfig ec = cfg.encoder();
        for (const Tensor& pts : *emb.points) {
            auto enc = encode_object(tape, pts, p, ec);
            embeddings.push_back(enc.embedding);
            fwd.tnet_mats.push_back(enc.tnet_matrix);
        }
    } else {
        throw std::invalid_argument("scene_forward: no embedding source");
    }

    SceneGraphState state;
    state.nodes = tape.stack_rows(embeddings);
    state.pairs = st.pairs;
    state.dist = st.dist;
    const RelationConfig rc = cfg.relation();
    for (std::size_t e = 0; e < st.pairs.size(); ++e) {
        const auto [i, j] = st.pairs[e];
        state.edge_feats.push_back(init_edge_feature(tape, embeddings[static_cast<std::size_t>(i)],
                                                     embeddings[static_cast<std::size_t>(j)],
                                                     tape.constant(st.geo[e]), p, rc));
    }

    gnn_forward(tape, state, p, cfg.gnn());

    fwd.obj_logits = tape.linear(state.nodes, p("head.obj.w"), p("head.obj.b"));
    if (!state.pairs.empty()) {
        Var edge_mat = tape.stack_rows(state.edge_feats);
        fwd.pred_logits = tape.linear(edge_mat, p("head.pred.w"), p("head.pred.b"));
        if (cfg.lse) {
            for (std::size_t e = 0; e < state.edge_feats.size(); ++e)
                fwd.lse_preds.push_back(lse_reconstruct(tape, state.edge_feats[e], p, rc));
        }
    }
    return fwd;
}

Var sg_loss(Tape& tape, const SceneForward& fwd, const SceneTensors& st, const ModelConfig& cfg,
            const LossWeights& w) {
    Var total = tape.scale(tape.cross_entropy_logits(fwd.obj_logits, st.labels), w.lambda_obj);
    if (fwd.pred_logits.valid() && !st.pairs.empty()) {
        Var bce = tape.bce_with_logits(fwd.pred_logits, st.pred_targets);
        total = tape.add(total, tape.scale(bce, w.lambda_rel));
    }
    if (cfg.lse && !fwd.lse_preds.empty() && w.lambda_lse > 0.0) {
        std::vector<Var> terms;
        for (std::size_t e = 0; e < fwd.lse_preds.size(); ++e)
            terms.push_back(lse_loss(tape, fwd.lse_preds[e], st.geo[e]));
        Var l1 = tape.mean(tape.stack_scalars(terms));
        total = tape.add(total, tape.scale(l1, w.lambda_lse));
    }
    return total;
}

std::vector<Tensor> preprocess_scene_points(const Scene& scene, int points, Rng rng) {
    std::vector<Tensor> out;
    out.reserve(scene.instances.size());
    for (std::size_t i = 0; i < scene.instances.size(); ++i) {
        Rng sub = rng.fork(i);
        out.push_back(downsample(translate_to_origin(scene.instances[i].points), points, sub));
    }
    return out;
}

ScenePrediction predict_scene(const Scene& scene, const ParameterStore& store, const ModelConfig& cfg,
                              std::uint64_t sample_seed) {
    const SceneTensors st = prepare_scene(scene, cfg);
    const int n = static_cast<int>(scene.instances.size());

    std::vector<Tensor> emb;
    const auto proc = preprocess_scene_points(scene, cfg.points, Rng(sample_seed));
    const EncoderConfig ec = cfg.encoder();
    for (const Tensor& pts : proc) emb.push_back(encode_object_data(pts, store, ec));

    Tape tape;
    EmbeddingSource src;
    src.cached = &emb;
    SceneForward fwd = scene_forward(tape, st, src, const_params(tape, store), cfg);

    ScenePrediction pred;
    pred.id = scene.id;
    pred.gt_labels = st.labels;
    for (const auto& e : scene.edges) {
        Edge ge;
        ge.sub = scene.index_of(e.sub);
        ge.obj = scene.index_of(e.obj);
        ge.preds = e.preds;
        pred.gt_edges.push_back(std::move(ge));
    }
    Tape post;
    Var probs = post.softmax(post.constant(tape.val(fwd.obj_logits)), 1);
    pred.obj_probs = post.val(probs);
    pred.pred_scores = Tensor({n, n, cfg.n_pred}, 0.0);
    if (fwd.pred_logits.valid()) {
        Var scores = post.sigmoid(post.constant(tape.val(fwd.pred_logits)));
        const Tensor& sv = post.val(scores);
        for (std::size_t e = 0; e < st.pairs.size(); ++e) {
            const auto [i, j] = st.pairs[e];
            for (int p = 0; p < cfg.n_pred; ++p) pred.pred_scores.at(i, j, p) = sv.at(static_cast<int>(e), p);
        }
    }
    pred.validate();
    return pred;
}

} // namespace ssg
