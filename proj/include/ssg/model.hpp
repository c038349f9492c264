#pragma once

#include "ssg/dump.hpp"
#include "ssg/encoder.hpp"
#include "ssg/gnn.hpp"
#include "ssg/relation.hpp"
#include "ssg/scene.hpp"

#include <cstdint>
#include <optional>

namespace ssg {

struct ModelConfig {
    int n_obj = 4;
    int n_pred = 3;
    int d = 64;
    int d_e = 128;
    int heads = 8;
    int iterations = 2;
    int points = 256;    // downsample target for the encoder input
    int max_pairs = 4096; // candidate ordered-pair cap
    bool gse = true;
    bool beg = true;
    bool gating = true;
    bool lse = true;
    bool ofl = true; // frozen pretrained encoder

    EncoderConfig encoder() const;
    RelationConfig relation() const;
    GnnConfig gnn() const;
};

// Relation encoder + GNN + classification heads (everything but "enc.*").
void init_graph_params(ParameterStore& store, const ModelConfig& cfg, Rng& rng);

// Pure per-scene data reused across epochs: stats, distances, candidate pairs
// with descriptors, and multi-hot predicate targets.
struct SceneTensors {
    std::vector<InstanceStats> stats;
    Tensor dist;
    std::vector<std::pair<int, int>> pairs;
    std::vector<Tensor> geo;  // aligned with pairs
    Tensor pred_targets;      // [E, n_pred]
    std::vector<int> labels;
};
SceneTensors prepare_scene(const Scene& scene, const ModelConfig& cfg);

// Either cached unit embeddings (frozen encoder) or preprocessed point clouds
// to be encoded on the tape.
struct EmbeddingSource {
    const std::vector<Tensor>* cached = nullptr;
    const std::vector<Tensor>* points = nullptr;
};

struct SceneForward {
    Var obj_logits;             // [N, n_obj]
    Var pred_logits;            // [E, n_pred]; invalid when the scene has no pairs
    std::vector<Var> lse_preds; // aligned with pairs; empty when cfg.lse is off
    std::vector<Var> tnet_mats; // only when encoding on tape
};

SceneForward scene_forward(Tape& tape, const SceneTensors& st, const EmbeddingSource& emb, const ParamFn& p,
                           const ModelConfig& cfg);

struct LossWeights {
    double lambda_obj = 0.1;
    double lambda_rel = 3.0;
    double lambda_lse = 1.0;
};

// lambda_obj * CE + lambda_rel * BCE + lambda_lse * mean L1 over pairs
Var sg_loss(Tape& tape, const SceneForward& fwd, const SceneTensors& st, const ModelConfig& cfg,
            const LossWeights& w);

// Deterministic preprocessing for the encoder: translate to origin then
// downsample to cfg.points with the given stream.
std::vector<Tensor> preprocess_scene_points(const Scene& scene, int points, Rng rng);

// Full data-path inference for one scene; sample_seed drives the downsampling.
ScenePrediction predict_scene(const Scene& scene, const ParameterStore& store, const ModelConfig& cfg,
                              std::uint64_t sample_seed);

} // namespace ssg
