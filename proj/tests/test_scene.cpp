#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ssg/scene.hpp"
#include "ssg/util.hpp"

#include "test_util.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

using namespace ssg;

namespace {
Tensor unit_cube_corners() {
    return Tensor({8, 3}, {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0, 1, 0, 1, 0, 1, 1, 1, 1, 1});
}
} // namespace

TEST_CASE("stats of the unit cube corners") {
    const auto s = compute_instance_stats(unit_cube_corners());
    for (int a = 0; a < 3; ++a) {
        CHECK(s.mu[a] == doctest::Approx(0.5));
        CHECK(s.bbox[a] == doctest::Approx(1.0));
        CHECK(s.sigma[a] == doctest::Approx(0.5)); // population std of {0,1} balanced
    }
    CHECK(s.volume == doctest::Approx(1.0));
    CHECK(s.max_len == doctest::Approx(1.0));
}

TEST_CASE("stats are translation-equivariant in mu only and permutation-invariant") {
    Rng rng(5);
    Tensor pts = ssgtest::random_tensor({40, 3}, rng);
    const auto base = compute_instance_stats(pts);

    Tensor moved = pts;
    const double t[3] = {1.5, -2.0, 0.25};
    for (int i = 0; i < 40; ++i)
        for (int a = 0; a < 3; ++a) moved.at(i, a) += t[a];
    const auto shifted = compute_instance_stats(moved);
    for (int a = 0; a < 3; ++a) {
        CHECK(shifted.mu[a] == doctest::Approx(base.mu[a] + t[a]));
        CHECK(shifted.sigma[a] == doctest::Approx(base.sigma[a]));
        CHECK(shifted.bbox[a] == doctest::Approx(base.bbox[a]));
    }
    CHECK(shifted.volume == doctest::Approx(base.volume));
    CHECK(shifted.max_len == doctest::Approx(base.max_len));

    // reverse the rows
    Tensor perm({40, 3});
    for (int i = 0; i < 40; ++i)
        for (int a = 0; a < 3; ++a) perm.at(i, a) = pts.at(39 - i, a);
    const auto permuted = compute_instance_stats(perm);
    for (int a = 0; a < 3; ++a) {
        CHECK(permuted.mu[a] == doctest::Approx(base.mu[a]));
        CHECK(permuted.sigma[a] == doctest::Approx(base.sigma[a]));
    }
}

TEST_CASE("planar cloud gets the degenerate-axis clamp") {
    Tensor pts({4, 3}, {0, 0, 2, 1, 0, 2, 0, 1, 2, 1, 1, 2}); // z constant
    const auto s = compute_instance_stats(pts);
    CHECK(s.bbox[2] == doctest::Approx(1e-6));
    CHECK(s.volume > 0.0);
    CHECK(s.volume == doctest::Approx(s.bbox[0] * s.bbox[1] * s.bbox[2]));
}

TEST_CASE("geometric descriptor: self, hand case, antisymmetry") {
    const auto s = compute_instance_stats(unit_cube_corners());
    const Tensor zero = geometric_descriptor(s, s);
    for (double v : zero.data) CHECK(v == 0.0);

    InstanceStats a, b;
    for (int d = 0; d < 3; ++d) {
        a.mu[d] = d + 1.0;
        b.mu[d] = 0.0;
        a.sigma[d] = 1.0;
        b.sigma[d] = 0.5;
        a.bbox[d] = 2.0;
        b.bbox[d] = 1.0;
    }
    a.volume = 8.0;
    b.volume = 1.0;
    a.max_len = 2.0;
    b.max_len = 1.0;
    const Tensor g = geometric_descriptor(a, b);
    const double expect[11] = {1, 2, 3, 0.5, 0.5, 0.5, 1, 1, 1, std::log(8.0), std::log(2.0)};
    for (int i = 0; i < 11; ++i) CHECK(g.at(i) == doctest::Approx(expect[i]).epsilon(1e-12));

    const Tensor rev = geometric_descriptor(b, a);
    for (int i = 0; i < 11; ++i) CHECK(rev.at(i) == doctest::Approx(-g.at(i)).epsilon(1e-12));

    InstanceStats bad = a;
    bad.volume = 0.0;
    CHECK_THROWS_AS((void)geometric_descriptor(bad, b), std::invalid_argument);
}

TEST_CASE("distance matrix: single instance, 3-4-5 triangle, symmetry") {
    InstanceStats s1;
    CHECK(distance_matrix({s1}).at(0, 0) == 0.0);

    InstanceStats s2;
    s2.mu[0] = 3.0;
    s2.mu[1] = 4.0;
    const Tensor d = distance_matrix({s1, s2});
    CHECK(d.at(0, 1) == doctest::Approx(5.0));
    CHECK(d.at(1, 0) == doctest::Approx(5.0));
    CHECK(d.at(0, 0) == 0.0);

    Rng rng(17);
    std::vector<InstanceStats> many;
    for (int i = 0; i < 6; ++i) {
        InstanceStats s;
        for (int a = 0; a < 3; ++a) s.mu[a] = rng.normal();
        many.push_back(s);
    }
    const Tensor dm = distance_matrix(many);
    for (int i = 0; i < 6; ++i) {
        CHECK(dm.at(i, i) == 0.0);
        for (int j = 0; j < 6; ++j) {
            CHECK(dm.at(i, j) == dm.at(j, i));
            CHECK(dm.at(i, j) >= 0.0);
        }
    }
}

TEST_CASE("downsample: permutation when K == n, determinism, replacement when K < n") {
    Rng rng(3);
    Tensor pts = ssgtest::random_tensor({256, 3}, rng);
    Rng r1(9), r2(9);
    const Tensor a = downsample(pts, 256, r1);
    // permutation: same multiset of rows
    std::multiset<double> in, out;
    for (int i = 0; i < 256; ++i) {
        in.insert(pts.at(i, 0) + 2.0 * pts.at(i, 1) + 3.0 * pts.at(i, 2));
        out.insert(a.at(i, 0) + 2.0 * a.at(i, 1) + 3.0 * a.at(i, 2));
    }
    CHECK(in == out);

    const Tensor b = downsample(pts, 256, r2);
    CHECK(ssgtest::max_abs_diff(a, b) == 0.0);

    Tensor small = ssgtest::random_tensor({10, 3}, rng);
    Rng r3(4);
    const Tensor c = downsample(small, 256, r3);
    CHECK(c.rows() == 256);
    for (int i = 0; i < 256; ++i) {
        bool found = false;
        for (int j = 0; j < 10 && !found; ++j)
            found = c.at(i, 0) == small.at(j, 0) && c.at(i, 1) == small.at(j, 1) && c.at(i, 2) == small.at(j, 2);
        CHECK(found);
    }
}

TEST_CASE("z-rotation: identity at angle 0, isometry, z invariance") {
    Rng rng(21);
    Tensor pts = ssgtest::random_tensor({32, 3}, rng);
    CHECK(ssgtest::max_abs_diff(rotate_z(pts, 0.0), pts) == 0.0);

    Rng rr(77);
    const Tensor rot = random_z_rotation(pts, rr);
    for (int i = 0; i < 32; ++i) {
        CHECK(rot.at(i, 2) == pts.at(i, 2));
        for (int j = i + 1; j < 32; ++j) {
            double d0 = 0.0, d1 = 0.0;
            for (int a = 0; a < 3; ++a) {
                d0 += (pts.at(i, a) - pts.at(j, a)) * (pts.at(i, a) - pts.at(j, a));
                d1 += (rot.at(i, a) - rot.at(j, a)) * (rot.at(i, a) - rot.at(j, a));
            }
            CHECK(std::abs(std::sqrt(d0) - std::sqrt(d1)) < 1e-9);
        }
    }
}

TEST_CASE("scene JSONL round-trip, empty file, malformed line") {
    Scene s;
    s.id = "t1";
    s.split = "val";
    Instance i0;
    i0.id = 0;
    i0.label = 2;
    i0.points = Tensor({8, 3}, 0.25);
    Instance i1;
    i1.id = 5;
    i1.label = 0;
    i1.points = Tensor({9, 3}, -1.5);
    s.instances = {i0, i1};
    s.edges = {{0, 5, {1, 2}}};

    const std::string path = (std::filesystem::temp_directory_path() / "ssg_scene_test.jsonl").string();
    save_scenes(path, {s});
    const auto loaded = load_scenes(path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].id == "t1");
    CHECK(loaded[0].split == "val");
    REQUIRE(loaded[0].instances.size() == 2);
    CHECK(loaded[0].instances[1].id == 5);
    CHECK(loaded[0].instances[0].label == 2);
    CHECK(ssgtest::max_abs_diff(loaded[0].instances[0].points, i0.points) == 0.0);
    REQUIRE(loaded[0].edges.size() == 1);
    CHECK(loaded[0].edges[0].preds == std::vector<int>{1, 2});

    write_file(path, "");
    CHECK(load_scenes(path).empty());

    write_file(path, scene_to_json(s).substr(0, 40) + "\n");
    try {
        load_scenes(path);
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(":1:") != std::string::npos); // names the line
    }
    std::remove(path.c_str());
}

TEST_CASE("scene validation rejects broken graphs") {
    Scene s;
    s.id = "bad";
    Instance a;
    a.id = 0;
    a.points = Tensor({8, 3}, 0.0);
    s.instances = {a};
    s.edges = {{0, 0, {0}}};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.edges = {{0, 3, {0}}};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
