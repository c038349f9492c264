#pragma once

#include "ssg/model.hpp"
#include "ssg/synthetic.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssg {

// Hyperparameters mirror the published training recipe; desk() scales them
// down for fast CPU runs.
struct TrainConfig {
    // loss weights
    double lambda_obj = 0.1;
    double lambda_rel = 3.0;
    double lambda_lse = 1.0;
    double lambda_cross = 1.0;
    double lambda_reg = 0.001;
    double tau = 0.07;
    // pretraining (Adam, cosine decay to zero)
    double pretrain_lr = 0.01;
    int pretrain_epochs = 100;
    int pretrain_batch = 512;
    // scene-graph training (AdamW, cosine decay to zero)
    double lr = 1e-4;
    int epochs = 100;
    int batch_scenes = 2; // gradient accumulation over scenes
    double weight_decay = 0.01;
    // model dimensions
    int d = 64;
    int d_e = 128;
    int heads = 8;
    int iterations = 2;
    int points = 256;
    int n_obj = 0;  // 0 = infer from data
    int n_pred = 0; // 0 = infer from data
    double modal_noise = 0.1;
    // ablation switches
    bool gse = true;
    bool beg = true;
    bool lse = true;
    bool ofl = true;
    bool gating = true;
    std::uint64_t seed = 0;

    ModelConfig model(int inferred_n_obj, int inferred_n_pred) const;

    static TrainConfig desk();
    // JSON object or key=value lines; keys match the field names above.
    static TrainConfig from_file(const std::string& path);
    static TrainConfig from_text(const std::string& text);
    std::string to_json() const;
};

int infer_n_obj(const Dataset& data);
int infer_n_pred(const Dataset& data);

struct PretrainEpochRow {
    int epoch = 0;
    double loss = 0.0;
    double top1 = 0.0, top5 = 0.0, top10 = 0.0;
    double cumulative = 0.0;
};

struct PretrainResult {
    ParameterStore encoder; // checkpoint with the highest cumulative val accuracy
    std::vector<PretrainEpochRow> history;
    int best_epoch = -1;
    int n_obj = 0;
};

PretrainResult run_pretraining(const Dataset& data, const TrainConfig& cfg);

struct SgEpochRow {
    int epoch = 0;
    double loss = 0.0;
    double val_mr50 = 0.0;
};

struct SgResult {
    ParameterStore model; // encoder + relation + gnn + heads
    std::vector<SgEpochRow> history;
    int best_epoch = -1;
    ModelConfig model_cfg;
};

// encoder may be null only when cfg.ofl is false (joint training from scratch).
SgResult run_sg_training(const Dataset& data, const ParameterStore* encoder, const TrainConfig& cfg);

PredictionDump predict_dump(const std::vector<Scene>& scenes, const ParameterStore& store, const ModelConfig& cfg,
                            std::uint64_t seed);

std::string pretrain_history_csv(const std::vector<PretrainEpochRow>& rows);
std::string sg_history_csv(const std::vector<SgEpochRow>& rows);

} // namespace ssg
