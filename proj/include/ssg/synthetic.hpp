#pragma once

#include "ssg/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssg {

// Deterministic geometric labeling rules. Ground truth stays machine-checkable:
// an edge (i,j) carries predicate p iff rule p holds on the instance stats.
struct PredicateRule {
    enum class Kind { Near, Far, Between, BiggerThan, SmallerThan, Above, Below };
    int predicate = 0;
    Kind kind = Kind::Near;
    double threshold = 1.0;
    double threshold2 = 0.0; // Between only: threshold <= d < threshold2
};

PredicateRule::Kind rule_kind_from_string(const std::string& s);
std::string rule_kind_to_string(PredicateRule::Kind k);

struct SyntheticConfig {
    int n_obj = 4;
    int n_pred = 3;
    int n_scenes = 8;
    int min_instances = 3;
    int max_instances = 6;
    int min_points = 64;
    int max_points = 192;
    double room_extent = 6.0; // xy extent in meters
    double z_extent = 2.0;
    double val_fraction = 0.25;
    std::uint64_t seed = 0;
    std::vector<PredicateRule> rules;
    std::vector<double> class_weights; // empty = Zipf-like 1/(k+1)

    void validate() const; // throws on inconsistent rule table

    // 3 mutually exclusive distance bands; exactly one predicate per pair.
    // Keeps top-1 predicate recall attainable at 100%.
    static SyntheticConfig distance_bands(int n_obj, int n_scenes, std::uint64_t seed);
    // Mixed rule set (near/far/bigger/above) with overlapping predicates.
    static SyntheticConfig mixed(int n_obj, int n_pred, int n_scenes, std::uint64_t seed);
};

bool rule_holds(const PredicateRule& r, const InstanceStats& si, const InstanceStats& sj, double dist);
std::vector<int> predicates_for_pair(const std::vector<PredicateRule>& rules, const InstanceStats& si,
                                     const InstanceStats& sj, double dist);

struct Dataset {
    std::vector<Scene> train;
    std::vector<Scene> val;
};

Dataset generate_dataset(const SyntheticConfig& cfg);

// Per-class box dimensions used by the generator (shape identifies the class).
void class_box_dims(int label, double out[3]);

} // namespace ssg
