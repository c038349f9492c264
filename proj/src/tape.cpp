#include "ssg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssg {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// basic cache-friendly GEMM: c [n,m] += a [n,k] * b [k,m]
void gemm_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        const double* arow = &a.data[static_cast<std::size_t>(i) * k];
        double* crow = &c.data[static_cast<std::size_t>(i) * m];
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &b.data[static_cast<std::size_t>(p) * m];
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

Tensor transposed(const Tensor& a) {
    Tensor t({a.cols(), a.rows()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

} // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.grad = Tensor(value.shape, 0.0);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v) const {
    if (v.id < 0 || v.id >= size()) throw std::logic_error("Var does not belong to this tape");
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

const Tensor& Tape::val(Var v) const {
    check(v);
    return nodes_[static_cast<std::size_t>(v.id)].value;
}

const Tensor& Tape::grad(Var v) const {
    check(v);
    return nodes_[static_cast<std::size_t>(v.id)].grad;
}

void Tape::reset() { nodes_.clear(); }

void Tape::backward(Var loss) {
    check(loss);
    require(val(loss).numel() == 1, "backward: loss must be scalar");
    for (auto& n : nodes_) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    nodes_[static_cast<std::size_t>(loss.id)].grad.data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.requires_grad && n.back) n.back(*this);
    }
}

// ---------------------------------------------------------------------------
// elementwise / linear algebra
// ---------------------------------------------------------------------------

Var Tape::add(Var a, Var b) {
    check(a); check(b);
    require(val(a).same_shape(val(b)), "add: shape mismatch " + val(a).shape_str() + " vs " + val(b).shape_str());
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += val(b).data[i];
    bool needs = rg(a) || rg(b);
    Var self{size()};
    return push(std::move(out), needs, [a, b, self](Tape& t) {
        const Tensor& g = t.grad(self);
        if (t.rg(a)) {
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }
        if (t.rg(b)) {
            Tensor& gb = t.grad_mut(b);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    check(a); check(b);
    require(val(a).same_shape(val(b)), "sub: shape mismatch");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= val(b).data[i];
    bool needs = rg(a) || rg(b);
    Var self{size()};
    return push(std::move(out), needs, [a, b, self](Tape& t) {
        const Tensor& g = t.grad(self);
        if (t.rg(a)) {
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }
        if (t.rg(b)) {
            Tensor& gb = t.grad_mut(b);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    check(a); check(b);
    require(val(a).same_shape(val(b)), "mul: shape mismatch");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= val(b).data[i];
    bool needs = rg(a) || rg(b);
    Var self{size()};
    return push(std::move(out), needs, [a, b, self](Tape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        if (t.rg(a)) {
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * bv.data[i];
        }
        if (t.rg(b)) {
            Tensor& gb = t.grad_mut(b);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * av.data[i];
        }
    });
}

Var Tape::smul(Var scalar, Var b) {
    check(scalar); check(b);
    require(val(scalar).numel() == 1, "smul: first argument must be scalar");
    const double s = val(scalar).data[0];
    Tensor out = val(b);
    for (double& x : out.data) x *= s;
    bool needs = rg(scalar) || rg(b);
    Var self{size()};
    return push(std::move(out), needs, [scalar, b, self](Tape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& bv = t.val(b);
        const double sv = t.val(scalar).data[0];
        if (t.rg(scalar)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.data.size(); ++i) acc += g.data[i] * bv.data[i];
            t.grad_mut(scalar).data[0] += acc;
        }
        if (t.rg(b)) {
            Tensor& gb = t.grad_mut(b);
            for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * sv;
        }
    });
}

Var Tape::scale(Var a, double c) {
    check(a);
    Tensor out = val(a);
    for (double& x : out.data) x *= c;
    Var self{size()};
    return push(std::move(out), rg(a), [a, c, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
    });
}

Var Tape::add_const(Var a, double c) {
    check(a);
    Tensor out = val(a);
    for (double& x : out.data) x += c;
    Var self{size()};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    });
}

Var Tape::matmul(Var a, Var b) {
    check(a); check(b);
    require(val(a).rank() == 2 && val(b).rank() == 2, "matmul: operands must be rank-2");
    require(val(a).cols() == val(b).rows(),
            "matmul: inner dimensions differ, " + val(a).shape_str() + " x " + val(b).shape_str());
    Tensor out({val(a).rows(), val(b).cols()}, 0.0);
    gemm_acc(val(a), val(b), out);
    bool needs = rg(a) || rg(b);
    Var self{size()};
    return push(std::move(out), needs, [a, b, self](Tape& t) {
        const Tensor& g = t.grad(self);
        if (t.rg(a)) gemm_acc(g, transposed(t.val(b)), t.grad_mut(a));
        if (t.rg(b)) gemm_acc(transposed(t.val(a)), g, t.grad_mut(b));
    });
}

Var Tape::transpose(Var a) {
    check(a);
    require(val(a).rank() == 2, "transpose: rank-2 only");
    Tensor out = transposed(val(a));
    Var self{size()};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad_mut(a);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) ga.at(j, i) += g.at(i, j);
    });
}

Var Tape::linear(Var x, Var w, Var b) {
    check(x); check(w);
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    require(wv.rank() == 2, "linear: weight must be rank-2");
    const bool vec_in = xv.rank() == 1;
    const int in = vec_in ? xv.dim(0) : xv.cols();
    const int n = vec_in ? 1 : xv.rows();
    const int out_dim = wv.cols();
    require(in == wv.rows(), "linear: input dim " + std::to_string(in) + " vs weight rows " + std::to_string(wv.rows()));
    bool has_b = b.valid();
    if (has_b) {
        check(b);
        require(val(b).rank() == 1 && val(b).dim(0) == out_dim, "linear: bias dim mismatch");
    }
    Tensor out(vec_in ? Shape{out_dim} : Shape{n, out_dim}, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* xr = &xv.data[static_cast<std::size_t>(i) * in];
        double* orow = &out.data[static_cast<std::size_t>(i) * out_dim];
        for (int p = 0; p < in; ++p) {
            const double xvp = xr[p];
            if (xvp == 0.0) continue;
            const double* wrow = &wv.data[static_cast<std::size_t>(p) * out_dim];
            for (int j = 0; j < out_dim; ++j) orow[j] += xvp * wrow[j];
        }
        if (has_b)
            for (int j = 0; j < out_dim; ++j) orow[j] += val(b).data[static_cast<std::size_t>(j)];
    }
    bool needs = rg(x) || rg(w) || (has_b && rg(b));
    Var self{size()};
    return push(std::move(out), needs, [x, w, b, has_b, n, in, out_dim, self](Tape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& xv2 = t.val(x);
        const Tensor& wv2 = t.val(w);
        if (t.rg(x)) {
            Tensor& gx = t.grad_mut(x);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < out_dim; ++j) {
                    const double gv = g.data[static_cast<std::size_t>(i) * out_dim + j];
                    if (gv == 0.0) continue;
                    for (int p = 0; p < in; ++p)
                        gx.data[static_cast<std::size_t>(i) * in + p] += gv * wv2.data[static_cast<std::size_t>(p) * out_dim + j];
                }
        }
        if (t.rg(w)) {
            Tensor& gw = t.grad_mut(w);
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < in; ++p) {
                    const double xvp = xv2.data[static_cast<std::size_t>(i) * in + p];
                    if (xvp == 0.0) continue;
                    for (int j = 0; j < out_dim; ++j)
                        gw.data[static_cast<std::size_t>(p) * out_dim + j] += xvp * g.data[static_cast<std::size_t>(i) * out_dim + j];
                }
        }
        if (has_b && t.rg(b)) {
            Tensor& gb = t.grad_mut(b);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < out_dim; ++j) gb.data[static_cast<std::size_t>(j)] += g.data[static_cast<std::size_t>(i) * out_dim + j];
        }
    });
}

Var Tape::relu(Var a) {
    check(a);
    Tensor out = val(a);
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    Var self{size()};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        const Tensor& av = t.val(a);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i)
            if (av.data[i] > 0.0) ga.data[i] += g.data[i];
    });
}

Var Tape::sigmoid(Var a) {
    check(a);
    Tensor out = val(a);
    for (double& x : out.data) x = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    Var self{size()};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    });
}

Var Tape::exp(Var a) {
    check(a);
    Tensor out = val(a);
    for (double& x : out.data) x = std::exp(x);
    Var self{size()};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * y.data[i];
    });
}

Var Tape::log(Var a) {
    check(a);
    Tensor out = val(a);
    for (double& x : out.data) x = std::log(x);
    Var self{size()};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        const Tensor& av = t.val(a);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] / av.data[i];
    });
}

Var Tape::softmax(Var a, int axis) {
    check(a);
    const Tensor& av = val(a);
    require(av.rank() == 1 || av.rank() == 2, "softmax: rank 1 or 2 only");
    require(axis >= 0 && axis < av.rank(), "softmax: bad axis");
    Tensor out = av;
    auto run_slice = [&](int start, int stride, int count) {
        double mx = out.data[static_cast<std::size_t>(start)];
        for (int k = 1; k < count; ++k) mx = std::max(mx, out.data[static_cast<std::size_t>(start + k * stride)]);
        double denom = 0.0;
        for (int k = 0; k < count; ++k) {
            double& x = out.data[static_cast<std::size_t>(start + k * stride)];
            x = std::exp(x - mx);
            denom += x;
        }
        for (int k = 0; k < count; ++k) out.data[static_cast<std::size_t>(start + k * stride)] /= denom;
    };
    if (av.rank() == 1) {
        run_slice(0, 1, av.dim(0));
    } else if (axis == 1) {
        for (int i = 0; i < av.rows(); ++i) run_slice(i * av.cols(), 1, av.cols());
    } else {
        for (int j = 0; j < av.cols(); ++j) run_slice(j, av.cols(), av.rows());
    }
    Var self{size()};
    return push(std::move(out), rg(a), [a, axis, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_mut(a);
        auto back_slice = [&](int start, int stride, int count) {
            double dotgy = 0.0;
            for (int k = 0; k < count; ++k) {
                const std::size_t idx = static_cast<std::size_t>(start + k * stride);
                dotgy += g.data[idx] * y.data[idx];
            }
            for (int k = 0; k < count; ++k) {
                const std::size_t idx = static_cast<std::size_t>(start + k * stride);
                ga.data[idx] += y.data[idx] * (g.data[idx] - dotgy);
            }
        };
        if (y.rank() == 1) {
            back_slice(0, 1, y.dim(0));
        } else if (axis == 1) {
            for (int i = 0; i < y.rows(); ++i) back_slice(i * y.cols(), 1, y.cols());
        } else {
            for (int j = 0; j < y.cols(); ++j) back_slice(j, y.cols(), y.rows());
        }
    });
}

Var Tape::logsumexp(Var a) {
    check(a);
    const Tensor& av = val(a);
    require(av.numel() >= 1, "logsumexp: empty input");
    double mx = av.data[0];
    for (double x : av.data) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : av.data) s += std::exp(x - mx);
    Tensor out = Tensor::scalar(mx + std::log(s));
    Var self{size()};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const double g = t.grad(self).data[0];
        const Tensor& av2 = t.val(a);
        const double lse = t.val(self).data[0];
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < av2.data.size(); ++i) ga.data[i] += g * std::exp(av2.data[i] - lse);
    });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
    check(x); check(gamma); check(beta);
    const Tensor& xv = val(x);
    require(xv.rank() == 1 || xv.rank() == 2, "layer_norm: rank 1 or 2 only");
    const int d = xv.rank() == 1 ? xv.dim(0) : xv.cols();
    const int n = xv.rank() == 1 ? 1 : xv.rows();
    require(val(gamma).rank() == 1 && val(gamma).dim(0) == d, "layer_norm: gamma dim mismatch");
    require(val(beta).rank() == 1 && val(beta).dim(0) == d, "layer_norm: beta dim mismatch");
    Tensor out = xv;
    Tensor xhat = xv;        // cached for backward
    Tensor inv_std({n}, 0.0);
    for (int i = 0; i < n; ++i) {
        double* orow = &out.data[static_cast<std::size_t>(i) * d];
        double* hrow = &xhat.data[static_cast<std::size_t>(i) * d];
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += orow[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (orow[j] - mu) * (orow[j] - mu);
        var /= d;
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std.data[static_cast<std::size_t>(i)] = istd;
        for (int j = 0; j < d; ++j) {
            hrow[j] = (orow[j] - mu) * istd;
            orow[j] = val(gamma).data[static_cast<std::size_t>(j)] * hrow[j] + val(beta).data[static_cast<std::size_t>(j)];
        }
    }
    bool needs = rg(x) || rg(gamma) || rg(beta);
    Var self{size()};
    return push(std::move(out), needs,
                [x, gamma, beta, xhat, inv_std, n, d, self](Tape& t) {
        const Tensor& g = t.grad(self);
        for (int i = 0; i < n; ++i) {
            const double* grow = &g.data[static_cast<std::size_t>(i) * d];
            const double* hrow = &xhat.data[static_cast<std::size_t>(i) * d];
            if (t.rg(gamma)) {
                Tensor& gg = t.grad_mut(gamma);
                for (int j = 0; j < d; ++j) gg.data[static_cast<std::size_t>(j)] += grow[j] * hrow[j];
            }
            if (t.rg(beta)) {
                Tensor& gb = t.grad_mut(beta);
                for (int j = 0; j < d; ++j) gb.data[static_cast<std::size_t>(j)] += grow[j];
            }
            if (t.rg(x)) {
                const double istd = inv_std.data[static_cast<std::size_t>(i)];
                double m1 = 0.0, m2 = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double gj = grow[j] * t.val(gamma).data[static_cast<std::size_t>(j)];
                    m1 += gj;
                    m2 += gj * hrow[j];
                }
                m1 /= d;
                m2 /= d;
                Tensor& gx = t.grad_mut(x);
                for (int j = 0; j < d; ++j) {
                    const double gj = grow[j] * t.val(gamma).data[static_cast<std::size_t>(j)];
                    gx.data[static_cast<std::size_t>(i) * d + j] += istd * (gj - m1 - hrow[j] * m2);
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

Var Tape::concat(const std::vector<Var>& parts, int axis) {
    require(!parts.empty(), "concat: no parts");
    for (Var p : parts) check(p);
    const int r = val(parts[0]).rank();
    require(r == 1 || r == 2, "concat: rank 1 or 2 only");
    require(axis >= 0 && axis < r, "concat: bad axis");
    bool needs = false;
    for (Var p : parts) needs = needs || rg(p);

    Tensor out;
    if (r == 1) {
        int total = 0;
        for (Var p : parts) total += val(p).dim(0);
        out = Tensor({total});
        int off = 0;
        for (Var p : parts) {
            const Tensor& pv = val(p);
            std::copy(pv.data.begin(), pv.data.end(), out.data.begin() + off);
            off += pv.dim(0);
        }
    } else if (axis == 0) {
        const int c = val(parts[0]).cols();
        int total = 0;
        for (Var p : parts) {
            require(val(p).cols() == c, "concat axis 0: column mismatch");
            total += val(p).rows();
        }
        out = Tensor({total, c});
        std::size_t off = 0;
        for (Var p : parts) {
            const Tensor& pv = val(p);
            std::copy(pv.data.begin(), pv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
            off += pv.data.size();
        }
    } else {
        const int rows0 = val(parts[0]).rows();
        int total = 0;
        for (Var p : parts) {
            require(val(p).rows() == rows0, "concat axis 1: row mismatch");
            total += val(p).cols();
        }
        out = Tensor({rows0, total});
        int coff = 0;
        for (Var p : parts) {
            const Tensor& pv = val(p);
            for (int i = 0; i < rows0; ++i)
                for (int j = 0; j < pv.cols(); ++j) out.at(i, coff + j) = pv.at(i, j);
            coff += pv.cols();
        }
    }
    Var self{size()};
    std::vector<Var> ps = parts;
    return push(std::move(out), needs, [ps, axis, r, self](Tape& t) {
        const Tensor& g = t.grad(self);
        if (r == 1 || axis == 0) {
            std::size_t off = 0;
            for (Var p : ps) {
                const std::size_t len = t.val(p).data.size();
                if (t.rg(p)) {
                    Tensor& gp = t.grad_mut(p);
                    for (std::size_t i = 0; i < len; ++i) gp.data[i] += g.data[off + i];
                }
                off += len;
            }
        } else {
            int coff = 0;
            for (Var p : ps) {
                const Tensor& pv = t.val(p);
                if (t.rg(p)) {
                    Tensor& gp = t.grad_mut(p);
                    for (int i = 0; i < pv.rows(); ++i)
                        for (int j = 0; j < pv.cols(); ++j) gp.at(i, j) += g.at(i, coff + j);
                }
                coff += pv.cols();
            }
        }
    });
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
    require(!rows.empty(), "stack_rows: no rows");
    for (Var v : rows) {
        check(v);
        require(val(v).rank() == 1, "stack_rows: rank-1 rows expected");
        require(val(v).dim(0) == val(rows[0]).dim(0), "stack_rows: width mismatch");
    }
    const int k = static_cast<int>(rows.size());
    const int d = val(rows[0]).dim(0);
    Tensor out({k, d});
    for (int i = 0; i < k; ++i)
        std::copy(val(rows[static_cast<std::size_t>(i)]).data.begin(), val(rows[static_cast<std::size_t>(i)]).data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(i) * d);
    bool needs = false;
    for (Var v : rows) needs = needs || rg(v);
    Var self{size()};
    std::vector<Var> rs = rows;
    return push(std::move(out), needs, [rs, d, self](Tape& t) {
        const Tensor& g = t.grad(self);
        for (std::size_t i = 0; i < rs.size(); ++i) {
            if (!t.rg(rs[i])) continue;
            Tensor& gr = t.grad_mut(rs[i]);
            for (int j = 0; j < d; ++j) gr.data[static_cast<std::size_t>(j)] += g.data[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
        }
    });
}

Var Tape::stack_scalars(const std::vector<Var>& xs) {
    require(!xs.empty(), "stack_scalars: empty input");
    Tensor out({static_cast<int>(xs.size())});
    bool needs = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        check(xs[i]);
        require(val(xs[i]).numel() == 1, "stack_scalars: non-scalar element");
        out.data[i] = val(xs[i]).data[0];
        needs = needs || rg(xs[i]);
    }
    Var self{size()};
    std::vector<Var> vs = xs;
    return push(std::move(out), needs, [vs, self](Tape& t) {
        const Tensor& g = t.grad(self);
        for (std::size_t i = 0; i < vs.size(); ++i)
            if (t.rg(vs[i])) t.grad_mut(vs[i]).data[0] += g.data[i];
    });
}

Var Tape::reshape(Var a, Shape s) {
    check(a);
    require(shape_numel(s) == val(a).numel(), "reshape: element count mismatch");
    Tensor out(std::move(s), val(a).data);
    Var self{size()};
    return push(std::move(out), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    });
}

Var Tape::row(Var m, int r) {
    check(m);
    require(val(m).rank() == 2, "row: rank-2 input expected");
    require(r >= 0 && r < val(m).rows(), "row: index out of range");
    const int d = val(m).cols();
    Tensor out({d});
    std::copy(val(m).data.begin() + static_cast<std::ptrdiff_t>(r) * d,
              val(m).data.begin() + static_cast<std::ptrdiff_t>(r + 1) * d, out.data.begin());
    Var self{size()};
    return push(std::move(out), rg(m), [m, r, d, self](Tape& t) {
        if (!t.rg(m)) return;
        const Tensor& g = t.grad(self);
        Tensor& gm = t.grad_mut(m);
        for (int j = 0; j < d; ++j) gm.data[static_cast<std::size_t>(r) * d + static_cast<std::size_t>(j)] += g.data[static_cast<std::size_t>(j)];
    });
}

Var Tape::pick(Var a, int flat) {
    check(a);
    require(flat >= 0 && static_cast<std::size_t>(flat) < val(a).numel(), "pick: index out of range");
    Tensor out = Tensor::scalar(val(a).data[static_cast<std::size_t>(flat)]);
    Var self{size()};
    return push(std::move(out), rg(a), [a, flat, self](Tape& t) {
        if (!t.rg(a)) return;
        t.grad_mut(a).data[static_cast<std::size_t>(flat)] += t.grad(self).data[0];
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var Tape::sum(Var a) {
    check(a);
    double s = 0.0;
    for (double x : val(a).data) s += x;
    Var self{size()};
    return push(Tensor::scalar(s), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const double g = t.grad(self).data[0];
        Tensor& ga = t.grad_mut(a);
        for (double& x : ga.data) x += g;
    });
}

Var Tape::mean(Var a) {
    check(a);
    const double n = static_cast<double>(val(a).numel());
    double s = 0.0;
    for (double x : val(a).data) s += x;
    Var self{size()};
    return push(Tensor::scalar(s / n), rg(a), [a, n, self](Tape& t) {
        if (!t.rg(a)) return;
        const double g = t.grad(self).data[0] / n;
        Tensor& ga = t.grad_mut(a);
        for (double& x : ga.data) x += g;
    });
}

Var Tape::mean_axis0(Var m) {
    check(m);
    require(val(m).rank() == 2, "mean_axis0: rank-2 input expected");
    const int n = val(m).rows(), d = val(m).cols();
    Tensor out({d}, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.data[static_cast<std::size_t>(j)] += val(m).at(i, j);
    for (double& x : out.data) x /= n;
    Var self{size()};
    return push(std::move(out), rg(m), [m, n, d, self](Tape& t) {
        if (!t.rg(m)) return;
        const Tensor& g = t.grad(self);
        Tensor& gm = t.grad_mut(m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) gm.at(i, j) += g.data[static_cast<std::size_t>(j)] / n;
    });
}

Var Tape::max_pool_rows(Var m) {
    check(m);
    require(val(m).rank() == 2, "max_pool_rows: rank-2 input expected");
    const int n = val(m).rows(), d = val(m).cols();
    require(n >= 1, "max_pool_rows: empty input");
    Tensor out({d});
    std::vector<int> argmax(static_cast<std::size_t>(d), 0);
    for (int j = 0; j < d; ++j) {
        double best = val(m).at(0, j);
        int bi = 0;
        for (int i = 1; i < n; ++i) {
            if (val(m).at(i, j) > best) {
                best = val(m).at(i, j);
                bi = i;
            }
        }
        out.data[static_cast<std::size_t>(j)] = best;
        argmax[static_cast<std::size_t>(j)] = bi;
    }
    Var self{size()};
    return push(std::move(out), rg(m), [m, argmax, d, self](Tape& t) {
        if (!t.rg(m)) return;
        const Tensor& g = t.grad(self);
        Tensor& gm = t.grad_mut(m);
        for (int j = 0; j < d; ++j) gm.at(argmax[static_cast<std::size_t>(j)], j) += g.data[static_cast<std::size_t>(j)];
    });
}

Var Tape::dot(Var a, Var b) {
    check(a); check(b);
    require(val(a).numel() == val(b).numel(), "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < val(a).data.size(); ++i) s += val(a).data[i] * val(b).data[i];
    bool needs = rg(a) || rg(b);
    Var self{size()};
    return push(Tensor::scalar(s), needs, [a, b, self](Tape& t) {
        const double g = t.grad(self).data[0];
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        if (t.rg(a)) {
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g * bv.data[i];
        }
        if (t.rg(b)) {
            Tensor& gb = t.grad_mut(b);
            for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += g * av.data[i];
        }
    });
}

Var Tape::sumsq(Var a) {
    check(a);
    double s = 0.0;
    for (double x : val(a).data) s += x * x;
    Var self{size()};
    return push(Tensor::scalar(s), rg(a), [a, self](Tape& t) {
        if (!t.rg(a)) return;
        const double g = t.grad(self).data[0];
        const Tensor& av = t.val(a);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += 2.0 * g * av.data[i];
    });
}

Var Tape::l1_loss(Var a, Var b) {
    check(a); check(b);
    require(val(a).same_shape(val(b)), "l1_loss: shape mismatch");
    const double n = static_cast<double>(val(a).numel());
    double s = 0.0;
    for (std::size_t i = 0; i < val(a).data.size(); ++i) s += std::abs(val(a).data[i] - val(b).data[i]);
    bool needs = rg(a) || rg(b);
    Var self{size()};
    return push(Tensor::scalar(s / n), needs, [a, b, n, self](Tape& t) {
        const double g = t.grad(self).data[0] / n;
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        for (std::size_t i = 0; i < av.data.size(); ++i) {
            const double diff = av.data[i] - bv.data[i];
            const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            if (t.rg(a)) t.grad_mut(a).data[i] += g * sign;
            if (t.rg(b)) t.grad_mut(b).data[i] -= g * sign;
        }
    });
}

Var Tape::normalize(Var v) {
    check(v);
    require(val(v).rank() == 1, "normalize: rank-1 input expected");
    double nrm = 0.0;
    for (double x : val(v).data) nrm += x * x;
    nrm = std::sqrt(nrm);
    require(nrm > 0.0, "normalize: zero vector");
    Tensor out = val(v);
    for (double& x : out.data) x /= nrm;
    Var self{size()};
    return push(std::move(out), rg(v), [v, nrm, self](Tape& t) {
        if (!t.rg(v)) return;
        const Tensor& g = t.grad(self);
        const Tensor& y = t.val(self);
        double gy = 0.0;
        for (std::size_t i = 0; i < g.data.size(); ++i) gy += g.data[i] * y.data[i];
        Tensor& gv = t.grad_mut(v);
        for (std::size_t i = 0; i < g.data.size(); ++i) gv.data[i] += (g.data[i] - y.data[i] * gy) / nrm;
    });
}

Var Tape::conv1d_k5(Var x, Var kernel, Var bias) {
    check(x); check(kernel); check(bias);
    const Tensor& xv = val(x);
    require(xv.rank() == 1 || xv.rank() == 2, "conv1d_k5: rank 1 or 2 input");
    require(val(kernel).rank() == 1 && val(kernel).dim(0) == 5, "conv1d_k5: kernel must be length 5");
    require(val(bias).numel() == 1, "conv1d_k5: bias must be scalar");
    const int n = xv.rank() == 1 ? 1 : xv.rows();
    const int d = xv.rank() == 1 ? xv.dim(0) : xv.cols();
    Tensor out = xv;
    const double bv = val(bias).data[0];
    for (int r = 0; r < n; ++r) {
        const double* xr = &xv.data[static_cast<std::size_t>(r) * d];
        double* orow = &out.data[static_cast<std::size_t>(r) * d];
        for (int i = 0; i < d; ++i) {
            double acc = bv;
            for (int tap = -2; tap <= 2; ++tap) {
                const int src = i + tap;
                if (src < 0 || src >= d) continue; // zero padding
                acc += val(kernel).data[static_cast<std::size_t>(tap + 2)] * xr[src];
            }
            orow[i] = acc;
        }
    }
    bool needs = rg(x) || rg(kernel) || rg(bias);
    Var self{size()};
    return push(std::move(out), needs, [x, kernel, bias, n, d, self](Tape& t) {
        const Tensor& g = t.grad(self);
        const Tensor& xv2 = t.val(x);
        const Tensor& kv = t.val(kernel);
        for (int r = 0; r < n; ++r) {
            const double* grow = &g.data[static_cast<std::size_t>(r) * d];
            const double* xr = &xv2.data[static_cast<std::size_t>(r) * d];
            for (int i = 0; i < d; ++i) {
                const double gv = grow[i];
                if (gv == 0.0) continue;
                if (t.rg(bias)) t.grad_mut(bias).data[0] += gv;
                for (int tap = -2; tap <= 2; ++tap) {
                    const int src = i + tap;
                    if (src < 0 || src >= d) continue;
                    if (t.rg(kernel)) t.grad_mut(kernel).data[static_cast<std::size_t>(tap + 2)] += gv * xr[src];
                    if (t.rg(x)) t.grad_mut(x).data[static_cast<std::size_t>(r) * d + static_cast<std::size_t>(src)] += gv * kv.data[static_cast<std::size_t>(tap + 2)];
                }
            }
        }
    });
}

Var Tape::cross_entropy_logits(Var logits, const std::vector<int>& labels) {
    check(logits);
    const Tensor& lv = val(logits);
    require(lv.rank() == 2, "cross_entropy_logits: rank-2 logits expected");
    const int n = lv.rows(), c = lv.cols();
    require(static_cast<int>(labels.size()) == n, "cross_entropy_logits: label count mismatch");
    for (int lab : labels) require(lab >= 0 && lab < c, "cross_entropy_logits: label out of range");
    // cache softmax probabilities for backward
    Tensor probs = lv;
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double* prow = &probs.data[static_cast<std::size_t>(i) * c];
        double mx = prow[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, prow[j]);
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            prow[j] = std::exp(prow[j] - mx);
            denom += prow[j];
        }
        for (int j = 0; j < c; ++j) prow[j] /= denom;
        loss -= std::log(probs.at(i, labels[static_cast<std::size_t>(i)]));
    }
    loss /= n;
    Var self{size()};
    std::vector<int> labs = labels;
    return push(Tensor::scalar(loss), rg(logits), [logits, probs, labs, n, c, self](Tape& t) {
        if (!t.rg(logits)) return;
        const double g = t.grad(self).data[0] / n;
        Tensor& gl = t.grad_mut(logits);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                double delta = probs.at(i, j) - (j == labs[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
                gl.at(i, j) += g * delta;
            }
    });
}

Var Tape::bce_with_logits(Var logits, Tensor targets) {
    check(logits);
    const Tensor& lv = val(logits);
    require(lv.same_shape(targets), "bce_with_logits: target shape mismatch");
    const double n = static_cast<double>(lv.numel());
    require(n > 0, "bce_with_logits: empty input");
    double loss = 0.0;
    for (std::size_t i = 0; i < lv.data.size(); ++i) {
        const double x = lv.data[i];
        const double y = targets.data[i];
        // max(x,0) - x*y + log(1 + exp(-|x|))
        loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    loss /= n;
    Var self{size()};
    return push(Tensor::scalar(loss), rg(logits), [logits, targets, n, self](Tape& t) {
        if (!t.rg(logits)) return;
        const double g = t.grad(self).data[0] / n;
        const Tensor& lv2 = t.val(logits);
        Tensor& gl = t.grad_mut(logits);
        for (std::size_t i = 0; i < lv2.data.size(); ++i) {
            const double x = lv2.data[i];
            const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            gl.data[i] += g * (sig - targets.data[i]);
        }
    });
}

} // namespace ssg
