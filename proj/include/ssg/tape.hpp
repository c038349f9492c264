#pragma once

#include "ssg/tensor.hpp"

#include <deque>
#include <functional>
#include <vector>

namespace ssg {

// Handle into a Tape node.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over a fixed primitive set. Ops append nodes, so the
// append order is a topological order; backward() walks it once in reverse
// and accumulates (never overwrites) parent gradients.
//
// Tensors on the tape are immutable once created. One tape is single-threaded;
// independent tapes may live on independent threads.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& val(Var v) const;
    const Tensor& grad(Var v) const;

    // ---- elementwise / linear algebra ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);            // elementwise, same shape
    Var smul(Var scalar, Var b);      // scalar Var times tensor
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    // x: [in] or [n,in]; w: [in,out]; b: [out] or invalid Var for none
    Var linear(Var x, Var w, Var b);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var exp(Var a);
    Var log(Var a);                   // domain: positive entries
    Var softmax(Var a, int axis);     // rank1 axis 0; rank2 axis 0 or 1
    Var logsumexp(Var a);             // all entries -> scalar
    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5); // last axis

    // ---- shape ----
    Var concat(const std::vector<Var>& parts, int axis);
    Var stack_rows(const std::vector<Var>& rows); // k x [d] -> [k,d]
    Var stack_scalars(const std::vector<Var>& xs); // k scalars -> [k]
    Var reshape(Var a, Shape s);
    Var row(Var m, int r);            // [d]
    Var pick(Var a, int flat);        // scalar

    // ---- reductions ----
    Var sum(Var a);
    Var mean(Var a);
    Var mean_axis0(Var m);            // [n,d] -> [d]
    Var max_pool_rows(Var m);         // [n,d] -> [d], column-wise max
    Var dot(Var a, Var b);            // vectors -> scalar
    Var sumsq(Var a);                 // squared Frobenius norm -> scalar
    Var l1_loss(Var a, Var b);        // mean |a-b| -> scalar
    Var normalize(Var v);             // vector to unit L2 norm

    // 1-channel conv along the feature axis, kernel size 5, same-padding 2.
    // x: [d] or [n,d] (rows independent); kernel: [5]; bias: [1]
    Var conv1d_k5(Var x, Var kernel, Var bias);

    // ---- fused classification losses (numerically stable) ----
    Var cross_entropy_logits(Var logits, const std::vector<int>& labels); // mean over rows
    Var bce_with_logits(Var logits, Tensor targets);                      // mean over entries

    void backward(Var scalar_loss);

    int size() const { return static_cast<int>(nodes_.size()); }
    void reset();

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back; // empty for leaves/constants
    };

    // deque keeps val()/grad() references stable while later ops append
    std::deque<Node> nodes_;

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    bool rg(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
    Tensor& grad_mut(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }
    void check(Var v) const;
};

} // namespace ssg
