#pragma once

#include "ssg/scene.hpp"
#include "ssg/tensor.hpp"

#include <string>
#include <vector>

namespace ssg {

// Model output for one scene plus the ground truth needed by the metrics.
// Object rows sum to 1; predicate scores are independent sigmoids; the
// diagonal (i,i) of the score volume is unused and kept at zero.
struct ScenePrediction {
    std::string id;
    Tensor obj_probs;   // [N, n_obj]
    Tensor pred_scores; // [N, N, n_pred]
    std::vector<int> gt_labels;
    std::vector<Edge> gt_edges;

    int n() const { return obj_probs.rows(); }
    int n_obj() const { return obj_probs.cols(); }
    int n_pred() const { return pred_scores.dim(2); }
    void validate() const;
};

using PredictionDump = std::vector<ScenePrediction>;

// JSONL, one scene per line, tensors as base64 little-endian f32.
std::string prediction_to_json(const ScenePrediction& p);
ScenePrediction prediction_from_json(const std::string& line);
void save_dump(const std::string& path, const PredictionDump& dump);
PredictionDump load_dump(const std::string& path);

} // namespace ssg
