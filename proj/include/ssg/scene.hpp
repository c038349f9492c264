#pragma once

#include "ssg/rng.hpp"
#include "ssg/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssg {

// Per-axis summary of an instance point cloud. Side lengths of degenerate
// bounding-box axes are clamped to 1e-6 so volume and max side stay positive
// (planar objects such as walls are common).
struct InstanceStats {
    double mu[3] = {0, 0, 0};
    double sigma[3] = {0, 0, 0}; // population std dev per axis
    double bbox[3] = {0, 0, 0};  // axis-aligned side lengths
    double volume = 0.0;
    double max_len = 0.0;
};

struct Instance {
    int id = 0;
    int label = 0;
    Tensor points; // K x 3, meters
};

struct Edge {
    int sub = 0;
    int obj = 0;
    std::vector<int> preds; // sorted, multi-label; may be empty (encodes "none")
};

struct Scene {
    std::string id;
    std::vector<Instance> instances;
    std::vector<Edge> edges; // unique (sub,obj) entries, sub != obj, endpoints exist
    std::string split = "train";

    int index_of(int instance_id) const; // -1 if absent
    void validate() const;               // throws on invariant violation
};

InstanceStats compute_instance_stats(const Tensor& points);

// Eq. g = (mu_i - mu_j, sigma_i - sigma_j, b_i - b_j, log(v_i/v_j), log(l_i/l_j))
Tensor geometric_descriptor(const InstanceStats& si, const InstanceStats& sj);

// Symmetric N x N matrix of centroid distances.
Tensor distance_matrix(const std::vector<InstanceStats>& stats);

// Exactly n points; without replacement when K >= n, with replacement otherwise.
Tensor downsample(const Tensor& points, int n, Rng& rng);

// Rigid rotation about the z axis by a uniform random angle.
Tensor random_z_rotation(const Tensor& points, Rng& rng);
Tensor rotate_z(const Tensor& points, double angle);

Tensor translate_to_origin(const Tensor& points); // subtract centroid

// JSONL persistence, one scene per line; floats with 9 significant digits.
std::string scene_to_json(const Scene& s);
Scene scene_from_json(const std::string& line);
void save_scenes(const std::string& path, const std::vector<Scene>& scenes);
std::vector<Scene> load_scenes(const std::string& path);

} // namespace ssg
