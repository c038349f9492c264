#pragma once

#include "ssg/optim.hpp"
#include "ssg/tape.hpp"

#include <functional>

namespace ssg {

// Builds the loss graph from the current store values and returns the loss Var.
// Must be deterministic: same store values, same loss.
using LossFn = std::function<Var(Tape&, TapeBinding&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    int worst_index = -1;
};

// Central-difference check of the tape gradient for every trainable scalar in
// the store. Relative error is |analytic - numeric| / (|analytic| + 1e-8).
GradCheckResult finite_diff_check(const LossFn& loss_fn, ParameterStore& store, double epsilon = 1e-5);

} // namespace ssg
