#pragma once

#include "ssg/rng.hpp"
#include "ssg/tensor.hpp"

#include <cmath>

namespace ssgtest {

inline ssg::Tensor random_tensor(ssg::Shape shape, ssg::Rng& rng, double scale = 1.0) {
    ssg::Tensor t(std::move(shape));
    for (double& x : t.data) x = scale * rng.normal();
    return t;
}

inline ssg::Tensor random_unit_vec(int d, ssg::Rng& rng) {
    ssg::Tensor t({d});
    double nrm = 0.0;
    for (double& x : t.data) {
        x = rng.normal();
        nrm += x * x;
    }
    nrm = std::sqrt(nrm);
    for (double& x : t.data) x /= nrm;
    return t;
}

inline double max_abs_diff(const ssg::Tensor& a, const ssg::Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

} // namespace ssgtest
