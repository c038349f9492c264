#pragma once

#include "ssg/rng.hpp"
#include "ssg/tape.hpp"
#include "ssg/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace ssg {

// Named parameter tensors with gradients and Adam moment state.
// std::map keeps iteration order deterministic.
class ParameterStore {
public:
    struct Entry {
        Tensor value;
        Tensor grad;
        Tensor m;
        Tensor v;
        bool trainable = true;
    };

    Tensor& add(const std::string& name, Tensor value, bool trainable = true);
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    Tensor& value(const std::string& name) { return at(name).value; }
    const Tensor& value(const std::string& name) const { return at(name).value; }

    void zero_grad();
    std::vector<std::string> names() const;
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    std::map<std::string, Entry>& entries() { return params_; }
    const std::map<std::string, Entry>& entries() const { return params_; }

    // Merge another store under a name prefix (used to assemble checkpoints).
    void absorb(const ParameterStore& other, const std::string& prefix, bool trainable);

    int step_count = 0; // shared Adam timestep

private:
    std::map<std::string, Entry> params_;
};

// Ties store parameters to leaves on one tape and pulls gradients back after
// backward(). Multiple bindings (one per tape) may accumulate into the same
// store before an optimizer step.
class TapeBinding {
public:
    TapeBinding(Tape& tape, ParameterStore& store) : tape_(&tape), store_(&store) {}

    Var param(const std::string& name);
    // Adds tape gradients of every bound parameter into the store gradients.
    void pull_grads();

private:
    Tape* tape_;
    ParameterStore* store_;
    std::vector<std::pair<std::string, Var>> bound_;
};

// Name -> tape Var lookup. Two flavors: trainable leaves through a binding,
// or constants for frozen parameters; forward code is identical either way.
using ParamFn = std::function<Var(const std::string&)>;
ParamFn bind_params(TapeBinding& bind);
ParamFn const_params(Tape& tape, const ParameterStore& store);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0; // 0 selects plain Adam; >0 selects AdamW-style decoupled decay
};

// One Adam/AdamW update from the accumulated gradients; increments step_count.
void adam_step(ParameterStore& store, const AdamConfig& cfg);

// Cosine decay from base_lr to zero over total_steps (step is 0-based).
double cosine_lr(double base_lr, int step, int total_steps);

// Uniform init in [-limit, limit] with limit = sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, Rng& rng);

} // namespace ssg
