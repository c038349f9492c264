#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ssg/optim.hpp"

#include "test_util.hpp"

#include <cmath>

using namespace ssg;

TEST_CASE("zero gradients leave parameters unchanged under plain Adam") {
    ParameterStore store;
    store.add("w", Tensor::vec({1.0, -2.0, 3.0}));
    AdamConfig cfg;
    cfg.lr = 0.1;
    adam_step(store, cfg);
    CHECK(store.value("w").at(0) == 1.0);
    CHECK(store.value("w").at(1) == -2.0);
    CHECK(store.value("w").at(2) == 3.0);
}

TEST_CASE("single scalar step matches the hand-rolled Adam formula") {
    // independent recomputation of one update from a known state
    const double w0 = 0.7, g = -0.3, lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ParameterStore store;
    store.add("w", Tensor::scalar(w0));
    store.at("w").grad.data[0] = g;
    AdamConfig cfg;
    cfg.lr = lr;
    adam_step(store, cfg);

    const double m = (1 - b1) * g;
    const double v = (1 - b2) * g * g;
    const double mhat = m / (1 - b1);
    const double vhat = v / (1 - b2);
    const double expected = w0 - lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(store.value("w").item() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("decoupled weight decay shrinks a zero-gradient parameter toward zero") {
    ParameterStore store;
    store.add("w", Tensor::scalar(2.0));
    AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.5;
    adam_step(store, cfg);
    CHECK(store.value("w").item() == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
    CHECK(store.value("w").item() < 2.0);
}

TEST_CASE("adam is deterministic given identical state and gradients") {
    auto run = []() {
        ParameterStore store;
        Rng rng(11);
        store.add("w", ssgtest::random_tensor({8}, rng));
        AdamConfig cfg;
        cfg.lr = 0.05;
        for (int s = 0; s < 5; ++s) {
            for (std::size_t i = 0; i < 8; ++i) store.at("w").grad.data[i] = 0.1 * static_cast<double>(i) - 0.3;
            adam_step(store, cfg);
        }
        return store.value("w");
    };
    const Tensor a = run();
    const Tensor b = run();
    CHECK(ssgtest::max_abs_diff(a, b) == 0.0);
}

TEST_CASE("non-trainable entries are skipped") {
    ParameterStore store;
    store.add("frozen", Tensor::scalar(1.0), /*trainable=*/false);
    store.at("frozen").grad.data[0] = 5.0;
    AdamConfig cfg;
    cfg.lr = 1.0;
    cfg.weight_decay = 1.0;
    adam_step(store, cfg);
    CHECK(store.value("frozen").item() == 1.0);
}

TEST_CASE("cosine decay starts at base lr and falls toward zero") {
    CHECK(cosine_lr(0.01, 0, 100) == doctest::Approx(0.01));
    CHECK(cosine_lr(0.01, 50, 100) == doctest::Approx(0.005));
    CHECK(cosine_lr(0.01, 99, 100) < 1e-5);
    for (int s = 1; s < 100; ++s) CHECK(cosine_lr(0.01, s, 100) < cosine_lr(0.01, s - 1, 100));
}

TEST_CASE("binding pulls gradients into the store additively") {
    ParameterStore store;
    store.add("w", Tensor::vec({1.0, 2.0}));
    for (int pass = 0; pass < 2; ++pass) {
        Tape tape;
        TapeBinding bind(tape, store);
        Var w = bind.param("w");
        tape.backward(tape.sumsq(w));
        bind.pull_grads();
    }
    // two passes accumulate: d/dw sum(w^2) = 2w, doubled
    CHECK(store.at("w").grad.at(0) == doctest::Approx(4.0));
    CHECK(store.at("w").grad.at(1) == doctest::Approx(8.0));
}

TEST_CASE("duplicate parameter names are rejected") {
    ParameterStore store;
    store.add("w", Tensor::scalar(0.0));
    CHECK_THROWS_AS(store.add("w", Tensor::scalar(1.0)), std::invalid_argument);
}
