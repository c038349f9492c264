#pragma once

#include "ssg/optim.hpp"
#include "ssg/tape.hpp"

namespace ssg {

// Initial edge features from (subject, object, geometric descriptor) plus the
// LSE reconstruction head. Subject and object pass through the same projection
// but occupy distinct concat slots, so (i,j) and (j,i) differ in general.
struct RelationConfig {
    int d = 64;        // object embedding dim
    int d_e = 128;     // edge feature dim
    int obj_proj = 64; // g_obj output
    int geo_proj = 16; // g_geo output
    int fr_hidden = 128;
    int lse_hidden = 64;
};

void init_relation_params(ParameterStore& store, const RelationConfig& cfg, Rng& rng);

// f_r(CAT(g_obj(z_i), g_obj(z_j), g_geo(g_ij))); f_r is an MLP followed by the
// kernel-5 conv over the feature axis.
Var init_edge_feature(Tape& tape, Var z_i, Var z_j, Var g_ij, const ParamFn& p, const RelationConfig& cfg);

Var lse_reconstruct(Tape& tape, Var z_e, const ParamFn& p, const RelationConfig& cfg);

// mean absolute error over the 11 descriptor components
Var lse_loss(Tape& tape, Var pred, const Tensor& g_ij);

} // namespace ssg
