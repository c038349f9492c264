#include "ssg/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace ssg {

GradCheckResult finite_diff_check(const LossFn& loss_fn, ParameterStore& store, double epsilon) {
    auto eval = [&]() -> double {
        Tape tape;
        TapeBinding bind(tape, store);
        Var loss = loss_fn(tape, bind);
        return tape.val(loss).item();
    };

    // analytic gradients
    store.zero_grad();
    {
        Tape tape;
        TapeBinding bind(tape, store);
        Var loss = loss_fn(tape, bind);
        if (tape.val(loss).numel() != 1) throw std::invalid_argument("finite_diff_check: loss must be scalar");
        tape.backward(loss);
        bind.pull_grads();
    }

    GradCheckResult res;
    for (auto& [name, e] : store.entries()) {
        if (!e.trainable) continue;
        for (std::size_t i = 0; i < e.value.data.size(); ++i) {
            const double saved = e.value.data[i];
            e.value.data[i] = saved + epsilon;
            const double fp = eval();
            e.value.data[i] = saved - epsilon;
            const double fm = eval();
            e.value.data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * epsilon);
            const double analytic = e.grad.data[i];
            const double rel = std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = name;
                res.worst_index = static_cast<int>(i);
            }
        }
    }
    return res;
}

} // namespace ssg
