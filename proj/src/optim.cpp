#include "ssg/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ssg {

Tensor& ParameterStore::add(const std::string& name, Tensor value, bool trainable) {
    if (params_.count(name)) throw std::invalid_argument("parameter already exists: " + name);
    Entry e;
    e.grad = Tensor(value.shape, 0.0);
    e.m = Tensor(value.shape, 0.0);
    e.v = Tensor(value.shape, 0.0);
    e.value = std::move(value);
    e.trainable = trainable;
    auto [it, ok] = params_.emplace(name, std::move(e));
    (void)ok;
    return it->second.value;
}

ParameterStore::Entry& ParameterStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

const ParameterStore::Entry& ParameterStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

void ParameterStore::zero_grad() {
    for (auto& [name, e] : params_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, e] : params_) out.push_back(name);
    return out;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : params_) n += e.value.numel();
    return n;
}

void ParameterStore::absorb(const ParameterStore& other, const std::string& prefix, bool trainable) {
    for (const auto& [name, e] : other.entries()) add(prefix + name, e.value, trainable);
}

Var TapeBinding::param(const std::string& name) {
    auto& e = store_->at(name);
    Var v = tape_->leaf(e.value, true);
    bound_.emplace_back(name, v);
    return v;
}

void TapeBinding::pull_grads() {
    for (const auto& [name, var] : bound_) {
        auto& e = store_->at(name);
        const Tensor& g = tape_->grad(var);
        for (std::size_t i = 0; i < g.data.size(); ++i) e.grad.data[i] += g.data[i];
    }
}

ParamFn bind_params(TapeBinding& bind) {
    return [&bind](const std::string& name) { return bind.param(name); };
}

ParamFn const_params(Tape& tape, const ParameterStore& store) {
    return [&tape, &store](const std::string& name) { return tape.constant(store.value(name)); };
}

void adam_step(ParameterStore& store, const AdamConfig& cfg) {
    store.step_count += 1;
    const int t = store.step_count;
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, e] : store.entries()) {
        if (!e.trainable) continue;
        for (std::size_t i = 0; i < e.value.data.size(); ++i) {
            const double g = e.grad.data[i];
            e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * g;
            e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = e.m.data[i] / bc1;
            const double vhat = e.v.data[i] / bc2;
            double upd = mhat / (std::sqrt(vhat) + cfg.eps);
            if (cfg.weight_decay > 0.0) upd += cfg.weight_decay * e.value.data[i]; // decoupled decay
            e.value.data[i] -= cfg.lr * upd;
        }
    }
}

double cosine_lr(double base_lr, int step, int total_steps) {
    if (total_steps <= 1) return base_lr;
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(1.0, frac)));
}

Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (double& x : t.data) x = rng.uniform(-limit, limit);
    return t;
}

} // namespace ssg
