#include "ssg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ssg {

PredicateRule::Kind rule_kind_from_string(const std::string& s) {
    if (s == "near") return PredicateRule::Kind::Near;
    if (s == "far") return PredicateRule::Kind::Far;
    if (s == "between") return PredicateRule::Kind::Between;
    if (s == "bigger_than") return PredicateRule::Kind::BiggerThan;
    if (s == "smaller_than") return PredicateRule::Kind::SmallerThan;
    if (s == "above") return PredicateRule::Kind::Above;
    if (s == "below") return PredicateRule::Kind::Below;
    throw std::invalid_argument("unknown rule kind: " + s);
}

std::string rule_kind_to_string(PredicateRule::Kind k) {
    switch (k) {
        case PredicateRule::Kind::Near: return "near";
        case PredicateRule::Kind::Far: return "far";
        case PredicateRule::Kind::Between: return "between";
        case PredicateRule::Kind::BiggerThan: return "bigger_than";
        case PredicateRule::Kind::SmallerThan: return "smaller_than";
        case PredicateRule::Kind::Above: return "above";
        case PredicateRule::Kind::Below: return "below";
    }
    return "?";
}

void SyntheticConfig::validate() const {
    if (n_obj < 1 || n_pred < 1) throw std::invalid_argument("config: class counts must be positive");
    if (n_scenes < 1) throw std::invalid_argument("config: n_scenes must be positive");
    if (min_instances < 2 || max_instances < min_instances)
        throw std::invalid_argument("config: bad instances-per-scene range");
    if (min_points < 8 || max_points < min_points)
        throw std::invalid_argument("config: bad points-per-instance range (min 8)");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw std::invalid_argument("config: val_fraction in [0,1)");
    if (rules.empty()) throw std::invalid_argument("config: rule table empty");
    for (const auto& r : rules) {
        if (r.predicate < 0 || r.predicate >= n_pred)
            throw std::invalid_argument("config: rule predicate index out of range");
        if ((r.kind == PredicateRule::Kind::Near || r.kind == PredicateRule::Kind::Far ||
             r.kind == PredicateRule::Kind::BiggerThan || r.kind == PredicateRule::Kind::SmallerThan) &&
            r.threshold <= 0.0)
            throw std::invalid_argument("config: rule threshold must be positive");
        if (r.kind == PredicateRule::Kind::Between && !(r.threshold2 > r.threshold))
            throw std::invalid_argument("config: between rule needs threshold2 > threshold");
    }
    std::set<int> with_rule;
    for (const auto& r : rules) {
        if (!with_rule.insert(r.predicate).second)
            throw std::invalid_argument("config: predicate has more than one rule");
    }
    if (!class_weights.empty()) {
        if (static_cast<int>(class_weights.size()) != n_obj)
            throw std::invalid_argument("config: class_weights size must equal n_obj");
        double total = 0.0;
        for (double w : class_weights) {
            if (w < 0.0) throw std::invalid_argument("config: negative class weight");
            total += w;
        }
        if (total <= 0.0) throw std::invalid_argument("config: all class weights zero");
    }
}

SyntheticConfig SyntheticConfig::distance_bands(int n_obj, int n_scenes, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.n_obj = n_obj;
    cfg.n_pred = 3;
    cfg.n_scenes = n_scenes;
    cfg.seed = seed;
    cfg.rules = {
        {0, PredicateRule::Kind::Near, 2.0},
        {1, PredicateRule::Kind::Between, 2.0, 4.0},
        {2, PredicateRule::Kind::Far, 4.0},
    };
    return cfg;
}

SyntheticConfig SyntheticConfig::mixed(int n_obj, int n_pred, int n_scenes, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.n_obj = n_obj;
    cfg.n_pred = n_pred;
    cfg.n_scenes = n_scenes;
    cfg.seed = seed;
    const std::vector<PredicateRule> bank = {
        {0, PredicateRule::Kind::Near, 2.0},       {1, PredicateRule::Kind::BiggerThan, 2.0},
        {2, PredicateRule::Kind::Above, 0.4},      {3, PredicateRule::Kind::Far, 4.5},
        {4, PredicateRule::Kind::SmallerThan, 3.0}, {5, PredicateRule::Kind::Below, 0.8},
    };
    if (n_pred > static_cast<int>(bank.size())) throw std::invalid_argument("mixed config supports up to 6 predicates");
    cfg.rules.assign(bank.begin(), bank.begin() + n_pred);
    return cfg;
}

bool rule_holds(const PredicateRule& r, const InstanceStats& si, const InstanceStats& sj, double dist) {
    switch (r.kind) {
        case PredicateRule::Kind::Near: return dist < r.threshold;
        case PredicateRule::Kind::Far: return dist > r.threshold;
        case PredicateRule::Kind::Between: return dist >= r.threshold && dist < r.threshold2;
        case PredicateRule::Kind::BiggerThan: return si.volume > r.threshold * sj.volume;
        case PredicateRule::Kind::SmallerThan: return sj.volume > r.threshold * si.volume;
        case PredicateRule::Kind::Above: return si.mu[2] > sj.mu[2] + r.threshold;
        case PredicateRule::Kind::Below: return sj.mu[2] > si.mu[2] + r.threshold;
    }
    return false;
}

std::vector<int> predicates_for_pair(const std::vector<PredicateRule>& rules, const InstanceStats& si,
                                     const InstanceStats& sj, double dist) {
    std::vector<int> preds;
    for (const auto& r : rules)
        if (rule_holds(r, si, sj, dist)) preds.push_back(r.predicate);
    std::sort(preds.begin(), preds.end());
    preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
    return preds;
}

void class_box_dims(int label, double out[3]) {
    out[0] = 0.35 + 0.22 * label;
    out[1] = 0.30 + 0.14 * ((label * 2) % 5);
    out[2] = 0.25 + 0.18 * ((label * 3) % 7);
}

namespace {

Scene generate_scene(const SyntheticConfig& cfg, int scene_index, Rng rng) {
    Scene scene;
    scene.id = "scene_" + std::to_string(scene_index);
    const int n_inst = rng.uniform_int(cfg.min_instances, cfg.max_instances);

    std::vector<double> weights = cfg.class_weights;
    if (weights.empty()) {
        weights.resize(static_cast<std::size_t>(cfg.n_obj));
        for (int k = 0; k < cfg.n_obj; ++k) weights[static_cast<std::size_t>(k)] = 1.0 / (k + 1.0);
    }

    std::vector<InstanceStats> stats;
    for (int i = 0; i < n_inst; ++i) {
        Instance inst;
        inst.id = i;
        inst.label = rng.weighted_index(weights);
        double dims[3];
        class_box_dims(inst.label, dims);
        const double jitter = rng.uniform(0.92, 1.08);
        for (double& d : dims) d *= jitter;
        const double cx = rng.uniform(0.0, cfg.room_extent);
        const double cy = rng.uniform(0.0, cfg.room_extent);
        const double cz = rng.uniform(dims[2] / 2.0, cfg.z_extent);
        const int k = rng.uniform_int(cfg.min_points, cfg.max_points);
        Tensor pts({k, 3});
        for (int p = 0; p < k; ++p) {
            pts.at(p, 0) = cx + dims[0] * (rng.uniform() - 0.5);
            pts.at(p, 1) = cy + dims[1] * (rng.uniform() - 0.5);
            pts.at(p, 2) = cz + dims[2] * (rng.uniform() - 0.5);
        }
        inst.points = std::move(pts);
        stats.push_back(compute_instance_stats(inst.points));
        scene.instances.push_back(std::move(inst));
    }

    const Tensor dmat = distance_matrix(stats);
    for (int i = 0; i < n_inst; ++i)
        for (int j = 0; j < n_inst; ++j) {
            if (i == j) continue;
            auto preds = predicates_for_pair(cfg.rules, stats[static_cast<std::size_t>(i)],
                                             stats[static_cast<std::size_t>(j)], dmat.at(i, j));
            if (!preds.empty()) scene.edges.push_back({i, j, std::move(preds)});
        }
    return scene;
}

} // namespace

Dataset generate_dataset(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    Dataset ds;
    const int n_val = static_cast<int>(std::floor(cfg.val_fraction * cfg.n_scenes));
    for (int s = 0; s < cfg.n_scenes; ++s) {
        Scene scene = generate_scene(cfg, s, root.fork(static_cast<std::uint64_t>(s)));
        scene.split = (s >= cfg.n_scenes - n_val) ? "val" : "train";
        scene.validate();
        if (scene.split == "val")
            ds.val.push_back(std::move(scene));
        else
            ds.train.push_back(std::move(scene));
    }
    return ds;
}

} // namespace ssg
